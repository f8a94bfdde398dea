// Shapes of the /v1 API payloads the console consumes.

export interface TaskItem {
  case_id: string;
  state: string;
  awaited_action: string;
  since: number;
  arguments: Record<string, unknown>;
}

export interface CaseSummary {
  case_id: string;
  pathway: string;
  state: string;
  principal: number;
  since: number;
  events: number;
}

export interface TasksResponse {
  tasks: TaskItem[];
  summaries: CaseSummary[];
  role: string | null;
}

export interface CaseEvent {
  time: number;
  event: string;
  actor: string;
  args: Record<string, unknown>;
}

export interface RiskLine {
  coverage_bps: number;
  seniority: string;
  cap: number;
  proposed_by: string;
  agreed_by_bank: boolean;
  agreed_by_cgi: boolean;
}

export interface CaseView {
  case_id: string;
  pathway: string;
  state: string;
  borrower: string;
  bank: string;
  cgi: string;
  principal: number;
  application_cid: string;
  event_log: CaseEvent[];
  party_labels: { borrower: string; bank: string; cgi: string };
  risk_line?: RiskLine;
  fee?: { fee_amount: number; payer: string; paid: boolean };
  certificate_cid?: string;
  loan?: { outstanding: number; consecutive_missed: number };
  claim?: { claimed_amount: number; eligibility: string; payout?: number };
}

export interface JournalEvent {
  seq: number;
  height: number;
  time: number;
  kind: string;
  case_id: string;
  event: string;
  actor: string;
  args: Record<string, unknown>;
  topics: string[];
}

export interface EventsPage {
  events: JournalEvent[];
  cursor: number;
  head_seq: number;
}

export interface LoginResponse {
  token: string;
  address: string;
  role: string | null;
  label: string;
}

export interface ActionResult {
  tx_hash: string;
  height: number;
  case_id: string;
  case_state: string | null;
}

export interface BlockView {
  height: number;
  prev_hash: string;
  proposer: string;
  state_root: string;
  tx_root: string;
  transactions: Array<{ sender: string; nonce: number; payload: Record<string, unknown> }>;
  finality_votes: Array<[string, string]>;
}

export interface ApiError {
  code: string;
  reason: string;
}
