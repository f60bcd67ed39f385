/**
 * Fetch client for the rating service.
 *
 * Authentication is a static bearer token; schema rejections surface
 * the service's item paths so the form can highlight them, and network
 * failures are distinguished from rejections so drafts can be kept.
 */

import type {
  Answers,
  NextStrip,
  Progress,
  StripPayload,
  StudyInfo,
  SubmitAck,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 422 from the service: one path per missing or invalid item. */
export class ValidationError extends ApiError {
  constructor(readonly problems: string[]) {
    super(`incomplete response: ${problems.join(", ")}`, 422);
    this.name = "ValidationError";
  }
}

/** Transport failure; nothing reached the service. */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
    this.name = "NetworkError";
  }
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class SessionApi {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  schema(): Promise<StudyInfo> {
    return this.request<StudyInfo>("GET", "/study/schema");
  }

  nextStrip(): Promise<NextStrip> {
    return this.request<NextStrip>("GET", "/session/next-strip");
  }

  strip(stripId: string): Promise<StripPayload> {
    return this.request<StripPayload>(
      "GET",
      `/strip/${encodeURIComponent(stripId)}`,
    );
  }

  submit(stripId: string, answers: Answers): Promise<SubmitAck> {
    return this.request<SubmitAck>(
      "POST",
      `/strip/${encodeURIComponent(stripId)}/response`,
      { answers },
    );
  }

  progress(): Promise<Progress> {
    return this.request<Progress>("GET", "/session/progress");
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = {
      method,
      headers: {
        authorization: `Bearer ${this.token}`,
        ...(body === undefined
          ? {}
          : { "content-type": "application/json" }),
      },
      ...(body === undefined ? {} : { body: JSON.stringify(body) }),
    };
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (response.ok) {
      return (await response.json()) as T;
    }
    const detail = await errorDetail(response);
    if (
      response.status === 422 &&
      typeof detail === "object" &&
      detail !== null &&
      Array.isArray(detail.problems)
    ) {
      throw new ValidationError(detail.problems as string[]);
    }
    const message =
      typeof detail === "string"
        ? detail
        : (detail?.message ?? `request failed with ${response.status}`);
    throw new ApiError(message, response.status);
  }
}

async function errorDetail(
  response: Response,
): Promise<{ problems?: unknown[]; message?: string } | string | null> {
  try {
    const parsed = (await response.json()) as { detail?: unknown };
    const detail = parsed.detail ?? parsed;
    if (typeof detail === "string") return detail;
    return detail as { problems?: unknown[]; message?: string };
  } catch {
    return null;
  }
}
