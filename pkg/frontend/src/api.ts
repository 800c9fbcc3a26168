/**
 * Typed client for the preference backend HTTP API.
 *
 * Task payloads are narrowed to exactly the annotator-facing fields; anything
 * else a response might carry is discarded here, so no other layer of the UI
 * can ever see or store system identities.
 */

export interface Progress {
  done: number;
  total: number;
}

export interface TaskView {
  pair_id: string;
  source_text: string;
  candidate_a: string;
  candidate_b: string;
  progress: Progress;
}

export type Choice = 'A' | 'B' | 'tie';

export type NextResult = { kind: 'task'; task: TaskView } | { kind: 'done'; progress: Progress };

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class DuplicateJudgmentError extends ApiError {}
export class UnknownTaskError extends ApiError {}
export class ConnectionError extends Error {}

interface ResponseLike {
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: { method?: string; headers?: Record<string, string>; body?: string }) => Promise<ResponseLike>;

function asProgress(value: unknown): Progress {
  const raw = (value ?? {}) as Record<string, unknown>;
  return {
    done: typeof raw.done === 'number' ? raw.done : 0,
    total: typeof raw.total === 'number' ? raw.total : 0,
  };
}

export class PrefApi {
  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly annotatorId: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async nextTask(): Promise<NextResult> {
    const url = `${this.baseUrl}/sessions/${this.sessionId}/next?annotator=${encodeURIComponent(this.annotatorId)}`;
    let reply: ResponseLike;
    try {
      reply = await this.fetchFn(url);
    } catch (err) {
      throw new ConnectionError(String(err));
    }
    const body = (await reply.json()) as Record<string, unknown>;
    if (reply.status !== 200) {
      throw new ApiError(String(body.error ?? 'request failed'), reply.status);
    }
    const progress = asProgress(body.progress);
    if (body.done === true) {
      return { kind: 'done', progress };
    }
    // Whitelist the annotator-facing fields; drop everything else.
    return {
      kind: 'task',
      task: {
        pair_id: String(body.pair_id),
        source_text: String(body.source_text),
        candidate_a: String(body.candidate_a),
        candidate_b: String(body.candidate_b),
        progress,
      },
    };
  }

  async submit(pairId: string, choice: Choice): Promise<Progress> {
    const url = `${this.baseUrl}/sessions/${this.sessionId}/judgments`;
    let reply: ResponseLike;
    try {
      reply = await this.fetchFn(url, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ pair_id: pairId, choice, annotator_id: this.annotatorId }),
      });
    } catch (err) {
      throw new ConnectionError(String(err));
    }
    const body = (await reply.json()) as Record<string, unknown>;
    if (reply.status === 409) {
      throw new DuplicateJudgmentError(String(body.error ?? 'duplicate judgment'), reply.status);
    }
    if (reply.status === 404) {
      throw new UnknownTaskError(String(body.error ?? 'unknown task'), reply.status);
    }
    if (reply.status !== 200) {
      throw new ApiError(String(body.error ?? 'submit failed'), reply.status);
    }
    return asProgress(body.progress);
  }
}
