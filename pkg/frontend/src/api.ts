// Thin fetch client for the /v1 gateway. No state beyond the session token;
// errors surface as ApiRequestError carrying the server's {code, reason}.

import type {
  ActionResult,
  ApiError,
  BlockView,
  CaseView,
  EventsPage,
  LoginResponse,
  TasksResponse,
} from "./types.js";

export class ApiRequestError extends Error {
  readonly code: string;
  readonly reason: string;
  readonly status: number;

  constructor(status: number, detail: ApiError) {
    super(`${detail.code}: ${detail.reason}`);
    this.status = status;
    this.code = detail.code;
    this.reason = detail.reason;
  }
}

export class ApiClient {
  private token = "";

  constructor(readonly baseUrl: string) {}

  get authenticated(): boolean {
    return this.token !== "";
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail = (payload as { detail?: ApiError }).detail ?? {
        code: `HTTP${response.status}`,
        reason: response.statusText,
      };
      throw new ApiRequestError(response.status, detail);
    }
    return payload as T;
  }

  async requestChallenge(address: string): Promise<string> {
    const body = await this.request<{ challenge: string }>("POST", "/v1/login", { address });
    return body.challenge;
  }

  async loginWithSignature(address: string, signature: string): Promise<LoginResponse> {
    const body = await this.request<LoginResponse>("POST", "/v1/login", { address, signature });
    this.token = body.token;
    return body;
  }

  /** Desk-scale shortcut: the server custodies the key and signs its own challenge. */
  async loginCustodial(address: string): Promise<LoginResponse> {
    await this.requestChallenge(address);
    const body = await this.request<LoginResponse>("POST", "/v1/login", {
      address,
      custodial: true,
    });
    this.token = body.token;
    return body;
  }

  logout(): void {
    this.token = "";
  }

  tasks(): Promise<TasksResponse> {
    return this.request<TasksResponse>("GET", "/v1/tasks");
  }

  submitAction(caseId: string, operation: string, args: Record<string, unknown>): Promise<ActionResult> {
    return this.request<ActionResult>("POST", `/v1/cases/${caseId}/actions`, {
      operation,
      arguments: args,
    });
  }

  caseView(caseId: string): Promise<CaseView> {
    return this.request<CaseView>("GET", `/v1/cases/${caseId}`);
  }

  events(cursor: number): Promise<EventsPage> {
    return this.request<EventsPage>("GET", `/v1/events?cursor=${cursor}`);
  }

  blocks(from: number, to: number): Promise<{ blocks: BlockView[]; height: number }> {
    return this.request("GET", `/v1/ledger/blocks?from=${from}&to=${to}`);
  }

  history(address: string): Promise<{ transactions: Array<Record<string, unknown>> }> {
    return this.request("GET", `/v1/accounts/${address}/history`);
  }

  document(cid: string): Promise<{ cid: string; text: string; content_base64: string }> {
    return this.request("GET", `/v1/docs/${cid}`);
  }
}
