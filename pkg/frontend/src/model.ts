// View-model layer: pure functions from API payloads to render-ready
// structures. Every action button is derived 1:1 from a TaskItem the API
// returned; nothing here invents an operation the server did not offer.

import type { CaseEvent, CaseSummary, CaseView, TaskItem } from "./types.js";

export interface FormField {
  name: string;
  label: string;
  kind: "number" | "text" | "select";
  options?: string[];
  value?: unknown;
  readonly?: boolean;
}

export interface ActionButton {
  id: string; // `${case_id}:${awaited_action}`
  caseId: string;
  operation: string;
  label: string;
  state: string;
  since: number;
  arguments: Record<string, unknown>;
  fields: FormField[];
  source: TaskItem;
}

const ACTION_LABELS: Record<string, string> = {
  submit_application: "Supplement application",
  bank_evaluate_loan: "Evaluate loan",
  cgi_decide_guarantee: "Decide guarantee",
  grant_to_bank: "Share financial data with bank",
  auto_submit_loan_request: "Submit loan request",
  bank_request_guarantee: "Request guarantee",
  risk_line_step: "Risk line",
  verify_fee_payment: "Verify fee payment",
  issue_certificate: "Issue certificate",
  disburse_loan: "Disburse loan",
  record_payment_event: "Record payment event",
  trigger_default: "Declare default",
  file_claim: "File claim",
  dispute_step: "Dispute",
  enforce_and_payout: "Enforce and close",
  pay_fee: "Pay guarantee fee",
};

export function actionLabel(operation: string): string {
  return ACTION_LABELS[operation] ?? operation;
}

/** Form fields a decision needs from the human, prefilled from the task's
 * suggested arguments. Operations without choices submit as suggested. */
export function formFields(task: TaskItem): FormField[] {
  const args = task.arguments;
  switch (task.awaited_action) {
    case "cgi_decide_guarantee":
      return [{ name: "decision", label: "Decision", kind: "select", options: ["approve", "reject"], value: "approve" }];
    case "bank_evaluate_loan":
      return [{ name: "decision", label: "Decision", kind: "select", options: ["accept", "reject"], value: "accept" }];
    case "risk_line_step": {
      // terms apply when the action is (or is switched to) a proposal
      const accepting = args["action"] === "accept";
      return [
        { name: "action", label: "Action", kind: "select",
          options: accepting ? ["accept", "propose"] : ["propose", "accept"],
          value: accepting ? "accept" : "propose" },
        { name: "coverage_bps", label: "Coverage (bps)", kind: "number", value: args["coverage_bps"] ?? 8000 },
        { name: "seniority", label: "Seniority", kind: "select", options: ["PariPassu", "FirstDemand"], value: args["seniority"] ?? "FirstDemand" },
        { name: "cap", label: "Cap (minor units)", kind: "number", value: args["cap"] ?? 0 },
      ];
    }
    case "record_payment_event":
      return [
        { name: "event", label: "Event", kind: "select", options: ["regular", "missed", "credit_note"], value: args["event"] ?? "regular" },
        { name: "amount", label: "Amount (regular only)", kind: "number", value: args["amount"] ?? 0 },
        { name: "note_cid", label: "Note cid (credit_note only)", kind: "text", value: "" },
      ];
    case "file_claim":
      return [
        { name: "claimed_amount", label: "Claimed amount", kind: "number", value: args["claimed_amount"] ?? 0 },
        { name: "recovery_action_cids", label: "Recovery evidence (cids, comma separated)", kind: "text", value: "" },
      ];
    case "dispute_step":
      if (args["action"] === "rule") {
        return [
          { name: "action", label: "Action", kind: "select", options: ["rule"], value: "rule", readonly: true },
          { name: "ruling", label: "Ruling", kind: "select", options: ["Upheld", "Overturned"], value: args["ruling"] ?? "Upheld" },
        ];
      }
      return [
        { name: "action", label: "Action", kind: "select", options: ["open"], value: "open", readonly: true },
        { name: "evidence_cids", label: "Evidence (cids, comma separated)", kind: "text", value: "" },
      ];
    case "pay_fee":
      return [
        { name: "amount", label: "Fee amount (exact)", kind: "number", value: args["amount"], readonly: true },
      ];
    case "submit_application":
      return [
        { name: "provided_fields", label: "Provide fields (comma separated)", kind: "text", value: (args["provided_fields"] as string[] | undefined)?.join(",") ?? "" },
      ];
    default:
      return [];
  }
}

/** Build inbox buttons strictly from what the API listed. */
export function inboxButtons(tasks: TaskItem[]): ActionButton[] {
  return tasks.map((task) => ({
    id: `${task.case_id}:${task.awaited_action}`,
    caseId: task.case_id,
    operation: task.awaited_action,
    label: actionLabel(task.awaited_action),
    state: task.state,
    since: task.since,
    arguments: task.arguments,
    fields: formFields(task),
    source: task,
  }));
}

/** Merge human form input back into the task's suggested arguments. */
export function buildArguments(task: TaskItem, input: Record<string, unknown>): Record<string, unknown> {
  const args: Record<string, unknown> = { ...task.arguments };
  for (const [name, raw] of Object.entries(input)) {
    if (raw === undefined || raw === "") continue;
    if (name === "recovery_action_cids" || name === "evidence_cids" || name === "provided_fields") {
      args[name] = String(raw)
        .split(",")
        .map((part) => part.trim())
        .filter((part) => part.length > 0);
    } else if (name === "coverage_bps" || name === "cap" || name === "amount" || name === "claimed_amount") {
      args[name] = Number(raw);
    } else {
      args[name] = raw;
    }
  }
  if (args["action"] === "accept") {
    // an acceptance carries no terms of its own
    delete args["coverage_bps"];
    delete args["seniority"];
    delete args["cap"];
  }
  if (args["event"] === "missed" || args["event"] === "credit_note") delete args["amount"];
  if (args["event"] !== "credit_note") delete args["note_cid"];
  return args;
}

export interface TimelineRow {
  time: number;
  event: string;
  actor: string;
  description: string;
  isOffer: boolean;
}

const EVENT_DESCRIPTIONS: Record<string, (e: CaseEvent) => string> = {
  case_opened: (e) => `case opened (${e.args["pathway"]})`,
  application_submitted: () => "application submitted to the guarantor",
  application_supplemented: (e) => `dossier supplemented: ${(e.args["provided_fields"] as string[])?.join(", ")}`,
  kyc_verified: () => "KYC checks passed automatically",
  kyc_more_data_requested: (e) => `KYC needs more data: ${(e.args["missing"] as string[])?.join(", ")}`,
  review_started: () => "guarantee under review",
  loan_application_recorded: () => "loan application recorded at the bank",
  collateral_insufficient: () => "collateral assessed: insufficient, guarantee needed",
  collateral_sufficient: () => "collateral sufficient, no guarantee needed",
  guarantee_requested: () => "guarantee requested from the guarantor",
  criteria_checked: (e) => `eligibility criteria ${e.args["overall"] ? "passed" : "failed"}`,
  guarantee_approved: () => "guarantee approved",
  guarantee_rejected: () => "guarantee rejected",
  financial_data_granted: () => "financial data shared with the bank",
  loan_requested: (e) => (e.args["implicit"] ? "loan request (implicit, bank initiated)" : "loan request sent to the bank"),
  bank_accepted: (e) => (e.args["implicit"] ? "bank acceptance (implicit)" : "bank accepted the loan"),
  bank_rejected: () => "bank rejected the loan",
  risk_line_proposed: (e) =>
    `risk line ${e.args["by"]} offer: ${e.args["coverage_bps"]} bps, ${e.args["seniority"]}, cap ${e.args["cap"]}`,
  risk_line_accepted: (e) => `risk line accepted by ${e.args["by"]}`,
  fee_computed: (e) => `guarantee fee due: ${e.args["fee_amount"]}`,
  fee_verified: () => "guarantee fee payment verified",
  certificate_issued: () => "guarantee certificate issued",
  loan_disbursed: (e) => `loan disbursed: ${e.args["principal"]}`,
  payment_recorded: (e) => `regular payment: ${e.args["amount"]}`,
  payment_missed: () => "payment missed",
  credit_note_added: () => "creditworthiness note recorded",
  loan_repaid: () => "loan fully repaid",
  case_closed: () => "case closed",
  default_triggered: () => "default triggered",
  claim_filed: (e) => `claim filed: ${e.args["claimed_amount"]}`,
  claim_ruled_eligible: () => "claim ruled eligible",
  claim_ruled_ineligible: (e) => `claim ruled ineligible: ${e.args["reason"]}`,
  dispute_opened: () => "dispute opened",
  dispute_ruling_recorded: (e) => `arbiter ruling (${e.args["slot"]}): ${e.args["ruling"]}`,
  dispute_rulings_reset: () => "discordant rulings, dispute continues",
  dispute_resolved: (e) => `dispute resolved: ${e.args["ruling"]}, claim ${e.args["final_eligibility"]}`,
  payout_executed: (e) => `payout executed: ${e.args["payout"]}`,
  case_closed_without_payout: () => "case closed without payout",
};

export function timelineRows(view: CaseView): TimelineRow[] {
  return view.event_log.map((event) => ({
    time: event.time,
    event: event.event,
    actor: event.actor,
    description: (EVENT_DESCRIPTIONS[event.event] ?? (() => event.event))(event),
    isOffer: event.event === "risk_line_proposed" || event.event === "risk_line_accepted",
  }));
}

/** The negotiation thread: offers and acceptances, oldest first. */
export function offerThread(view: CaseView): TimelineRow[] {
  return timelineRows(view).filter((row) => row.isOffer);
}

export function summaryLine(summary: CaseSummary): string {
  return `${summary.case_id} [${summary.pathway}] ${summary.state} principal=${summary.principal}`;
}

export interface NewCaseForm {
  operation: "submit_application" | "bank_evaluate_loan";
  title: string;
  fields: FormField[];
}

/** Case-creating forms are offered by role; they are forms, not task
 * buttons: tasks exist only for cases already on the ledger. */
export function creationFormFor(role: string | null): NewCaseForm | null {
  if (role === "Borrower") {
    return {
      operation: "submit_application",
      title: "Apply for a guarantee (ex-ante)",
      fields: [
        { name: "cgi", label: "Guarantor address", kind: "text" },
        { name: "bank", label: "Bank address", kind: "text" },
        { name: "principal", label: "Principal (minor units)", kind: "number" },
        { name: "application_cid", label: "Dossier content id", kind: "text" },
        { name: "required_fields", label: "Required fields (csv)", kind: "text", value: "id" },
        { name: "provided_fields", label: "Provided fields (csv)", kind: "text", value: "id" },
      ],
    };
  }
  if (role === "Bank") {
    return {
      operation: "bank_evaluate_loan",
      title: "Record a loan application (ex-post)",
      fields: [
        { name: "borrower", label: "Borrower address", kind: "text" },
        { name: "cgi", label: "Guarantor address", kind: "text" },
        { name: "principal", label: "Principal (minor units)", kind: "number" },
        { name: "application_cid", label: "Application content id", kind: "text" },
        { name: "collateral_sufficient", label: "Collateral sufficient", kind: "select", options: ["false", "true"], value: "false" },
      ],
    };
  }
  return null;
}

export function buildCreationArguments(form: NewCaseForm, input: Record<string, unknown>): Record<string, unknown> {
  const args: Record<string, unknown> = {};
  for (const field of form.fields) {
    const raw = input[field.name] ?? field.value;
    if (raw === undefined || raw === "") continue;
    if (field.name === "principal") args[field.name] = Number(raw);
    else if (field.name === "collateral_sufficient") args[field.name] = String(raw) === "true";
    else if (field.name === "required_fields" || field.name === "provided_fields") {
      args[field.name] = String(raw).split(",").map((s) => s.trim()).filter(Boolean);
    } else args[field.name] = raw;
  }
  if (!("schedule" in args)) {
    const principal = (args["principal"] as number) ?? 0;
    args["schedule"] = [[1000, principal]];
  }
  return args;
}
