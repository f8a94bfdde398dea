// Console controller: session, poll loop, screen state. Rendering is
// delegated to an injected Renderer so the same controller drives the DOM
// in a browser and a recording surface in tests.
//
// Two rules the controller enforces structurally:
//   - no optimistic UI: the screen is rebuilt only from server responses;
//   - no fabricated actions: clicks are accepted only for buttons that are
//     currently on screen, and buttons come 1:1 from API TaskItems.

import { ApiClient, ApiRequestError } from "./api.js";
import {
  ActionButton,
  NewCaseForm,
  buildArguments,
  buildCreationArguments,
  creationFormFor,
  inboxButtons,
  offerThread,
  timelineRows,
  TimelineRow,
} from "./model.js";
import type { BlockView, CaseSummary, CaseView, JournalEvent } from "./types.js";

export interface SessionInfo {
  address: string;
  role: string | null;
  label: string;
}

export interface OpenedCase {
  view: CaseView;
  timeline: TimelineRow[];
  offers: TimelineRow[];
}

export interface ExplorerData {
  blocks: BlockView[];
  height: number;
  events: JournalEvent[];
}

export interface Screen {
  session: SessionInfo | null;
  buttons: ActionButton[];
  summaries: CaseSummary[];
  creationForm: NewCaseForm | null;
  openedCase: OpenedCase | null;
  explorer: ExplorerData | null;
  notice: string;
  pollCount: number;
}

export interface Renderer {
  render(screen: Screen): void;
}

export interface ConsoleOptions {
  pollIntervalMs?: number;
}

export class ConsoleController {
  readonly pollIntervalMs: number;
  private screen: Screen = emptyScreen();
  private cursor = 0;
  private recentEvents: JournalEvent[] = [];
  private openedCaseId: string | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly renderer: Renderer,
    options: ConsoleOptions = {},
  ) {
    this.pollIntervalMs = options.pollIntervalMs ?? 1000;
  }

  current(): Screen {
    return this.screen;
  }

  private present(patch: Partial<Screen>): void {
    this.screen = { ...this.screen, ...patch };
    this.renderer.render(this.screen);
  }

  // ---- session ----

  async login(address: string): Promise<void> {
    const session = await this.api.loginCustodial(address);
    this.present({ session, notice: "" });
    await this.refresh();
  }

  async loginWithSignature(address: string, signature: string): Promise<void> {
    const session = await this.api.loginWithSignature(address, signature);
    this.present({ session, notice: "" });
    await this.refresh();
  }

  async challenge(address: string): Promise<string> {
    return this.api.requestChallenge(address);
  }

  logout(): void {
    this.stopPolling();
    this.api.logout();
    this.screen = emptyScreen();
    this.renderer.render(this.screen);
  }

  // ---- data flow ----

  /** Rebuild the inbox (and any opened case) from the server. */
  async refresh(): Promise<void> {
    const body = await this.api.tasks();
    const buttons = inboxButtons(body.tasks);
    let openedCase = this.screen.openedCase;
    if (this.openedCaseId !== null) {
      openedCase = await this.loadCase(this.openedCaseId);
    }
    this.present({
      buttons,
      summaries: body.summaries,
      creationForm: creationFormFor(body.role),
      openedCase,
    });
  }

  private async loadCase(caseId: string): Promise<OpenedCase> {
    const view = await this.api.caseView(caseId);
    return { view, timeline: timelineRows(view), offers: offerThread(view) };
  }

  async openCase(caseId: string): Promise<void> {
    this.openedCaseId = caseId;
    try {
      this.present({ openedCase: await this.loadCase(caseId), notice: "" });
    } catch (error) {
      this.handleError(error);
    }
  }

  closeCase(): void {
    this.openedCaseId = null;
    this.present({ openedCase: null });
  }

  /** One poll tick: advance the event cursor; refresh when anything new landed. */
  async pollOnce(): Promise<number> {
    const page = await this.api.events(this.cursor);
    this.cursor = page.cursor;
    this.present({ pollCount: this.screen.pollCount + 1 });
    if (page.events.length > 0) {
      this.recentEvents = [...this.recentEvents, ...page.events].slice(-100);
      await this.refresh();
    }
    return page.events.length;
  }

  startPolling(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      void this.pollOnce().catch(() => undefined);
    }, this.pollIntervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  // ---- actions ----

  /** Submit the decision behind an on-screen button. Unknown ids are a
   * programming error: buttons exist only where TaskItems did. */
  async clickAction(buttonId: string, input: Record<string, unknown> = {}): Promise<boolean> {
    const button = this.screen.buttons.find((b) => b.id === buttonId);
    if (button === undefined) {
      throw new Error(`no such action on screen: ${buttonId}`);
    }
    const args = buildArguments(button.source, input);
    try {
      const result = await this.api.submitAction(button.caseId, button.operation, args);
      this.present({ notice: `accepted: ${button.operation} -> ${result.case_state ?? "?"} (tx ${result.tx_hash.slice(0, 12)})` });
      await this.refresh();
      return true;
    } catch (error) {
      this.handleError(error);
      await this.refresh(); // someone else may have acted first; re-pull the inbox
      return false;
    }
  }

  async createCase(input: Record<string, unknown>): Promise<string | null> {
    const form = this.screen.creationForm;
    if (form === null) {
      throw new Error("this role cannot open cases");
    }
    try {
      const result = await this.api.submitAction("new", form.operation, buildCreationArguments(form, input));
      this.present({ notice: `case ${result.case_id} opened (${result.case_state})` });
      await this.refresh();
      return result.case_id;
    } catch (error) {
      this.handleError(error);
      return null;
    }
  }

  async loadExplorer(): Promise<void> {
    const page = await this.api.blocks(0, 1 << 20);
    this.present({
      explorer: { blocks: page.blocks, height: page.height, events: this.recentEvents },
    });
  }

  private handleError(error: unknown): void {
    if (error instanceof ApiRequestError) {
      this.present({ notice: `rejected: ${error.code} (${error.reason})` });
    } else {
      this.present({ notice: `error: ${String(error)}` });
    }
  }
}

export function emptyScreen(): Screen {
  return {
    session: null,
    buttons: [],
    summaries: [],
    creationForm: null,
    openedCase: null,
    explorer: null,
    notice: "",
    pollCount: 0,
  };
}
