/**
 * Browser bootstrap: read the service URL and rater token, then hand
 * the page over to the session controller.
 *
 * The token is pasted once and kept in sessionStorage for the tab's
 * lifetime; it never appears in the URL.
 */

import { SessionApi } from "./api.js";
import { SessionController } from "./app.js";

function tokenFromStorage(): string | null {
  return window.sessionStorage.getItem("dqa-token");
}

function connect(root: HTMLElement): void {
  const existing = tokenFromStorage();
  if (existing) {
    void run(root, existing);
    return;
  }
  const form = document.createElement("form");
  form.className = "connect";
  const label = document.createElement("label");
  label.textContent = "Rater access token";
  const input = document.createElement("input");
  input.type = "password";
  label.appendChild(input);
  const button = document.createElement("button");
  button.type = "submit";
  button.textContent = "Start session";
  form.append(label, button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const token = input.value.trim();
    if (!token) return;
    window.sessionStorage.setItem("dqa-token", token);
    void run(root, token);
  });
  root.replaceChildren(form);
}

async function run(root: HTMLElement, token: string): Promise<void> {
  const base = window.location.origin;
  const api = new SessionApi(base, token);
  const controller = new SessionController(api, root, window.localStorage);
  try {
    await controller.start();
  } catch {
    window.sessionStorage.removeItem("dqa-token");
    const message = document.createElement("p");
    message.className = "error";
    message.textContent =
      "Could not start the session. Check the token and reload.";
    root.replaceChildren(message);
  }
}

const root = document.getElementById("app");
if (root) connect(root);
