// DOM renderer: draws the screen model into the page. All interactivity is
// forwarded to the controller; this file never talks to the API.

import type { ConsoleController, Screen } from "./console.js";
import type { ActionButton, FormField } from "./model.js";

export class DomRenderer {
  private controller: ConsoleController | null = null;

  constructor(private readonly root: HTMLElement) {}

  attach(controller: ConsoleController): void {
    this.controller = controller;
  }

  render(screen: Screen): void {
    const c = this.controller;
    if (c === null) return;
    this.root.replaceChildren();
    if (screen.session === null) {
      this.root.appendChild(this.loginPanel(c));
      return;
    }
    this.root.appendChild(this.headerPanel(screen, c));
    if (screen.notice) {
      const notice = el("div", screen.notice.startsWith("rejected") || screen.notice.startsWith("error") ? "notice bad" : "notice ok");
      notice.textContent = screen.notice;
      this.root.appendChild(notice);
    }
    const columns = el("div", "columns");
    columns.appendChild(this.inboxPanel(screen, c));
    if (screen.openedCase !== null) columns.appendChild(this.casePanel(screen, c));
    if (screen.explorer !== null) columns.appendChild(this.explorerPanel(screen));
    this.root.appendChild(columns);
  }

  private loginPanel(c: ConsoleController): HTMLElement {
    const panel = el("div", "panel login");
    panel.appendChild(heading("Sign in"));
    const address = input("address", "actor address (hex)");
    const button = el("button") as HTMLButtonElement;
    button.textContent = "Login";
    button.onclick = () => void c.login(address.value.trim());
    panel.append(address, button);
    const hint = el("p", "hint");
    hint.textContent = "Custodial login: the gateway holds the actor keys and signs the challenge.";
    panel.appendChild(hint);
    return panel;
  }

  private headerPanel(screen: Screen, c: ConsoleController): HTMLElement {
    const bar = el("div", "topbar");
    const who = el("span", "who");
    who.textContent = `${screen.session!.label || screen.session!.address.slice(0, 12)} [${screen.session!.role}]`;
    const explorer = el("button") as HTMLButtonElement;
    explorer.textContent = "Ledger explorer";
    explorer.onclick = () => void c.loadExplorer();
    const logout = el("button") as HTMLButtonElement;
    logout.textContent = "Logout";
    logout.onclick = () => c.logout();
    bar.append(who, explorer, logout);
    return bar;
  }

  private inboxPanel(screen: Screen, c: ConsoleController): HTMLElement {
    const panel = el("div", "panel inbox");
    panel.appendChild(heading("Pending actions"));
    if (screen.buttons.length === 0) {
      const empty = el("p", "empty");
      empty.textContent = "No pending actions.";
      panel.appendChild(empty);
    }
    for (const button of screen.buttons) {
      panel.appendChild(this.actionCard(button, c));
    }
    if (screen.summaries.length > 0) {
      panel.appendChild(heading("Cases (read-only)"));
      for (const summary of screen.summaries) {
        const row = el("div", "summary");
        row.textContent = `${summary.case_id} [${summary.pathway}] ${summary.state}`;
        row.onclick = () => void c.openCase(summary.case_id);
        panel.appendChild(row);
      }
    }
    if (screen.creationForm !== null) {
      panel.appendChild(heading(screen.creationForm.title));
      panel.appendChild(this.creationForm(screen, c));
    }
    return panel;
  }

  private actionCard(button: ActionButton, c: ConsoleController): HTMLElement {
    const card = el("div", "card");
    const title = el("div", "card-title");
    title.textContent = `${button.caseId} | ${button.state}`;
    title.onclick = () => void c.openCase(button.caseId);
    card.appendChild(title);
    const form = el("form") as HTMLFormElement;
    const inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();
    for (const field of button.fields) {
      form.appendChild(this.fieldRow(field, inputs));
    }
    const submit = el("button", "action") as HTMLButtonElement;
    submit.textContent = button.label;
    submit.dataset["buttonId"] = button.id;
    form.onsubmit = (event) => {
      event.preventDefault();
      const values: Record<string, unknown> = {};
      for (const [name, element] of inputs) values[name] = element.value;
      void c.clickAction(button.id, values);
    };
    form.appendChild(submit);
    card.appendChild(form);
    return card;
  }

  private creationForm(screen: Screen, c: ConsoleController): HTMLElement {
    const form = el("form") as HTMLFormElement;
    const inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();
    for (const field of screen.creationForm!.fields) {
      form.appendChild(this.fieldRow(field, inputs));
    }
    const submit = el("button") as HTMLButtonElement;
    submit.textContent = "Open case";
    form.onsubmit = (event) => {
      event.preventDefault();
      const values: Record<string, unknown> = {};
      for (const [name, element] of inputs) values[name] = element.value;
      void c.createCase(values);
    };
    form.appendChild(submit);
    return form;
  }

  private fieldRow(field: FormField, sink: Map<string, HTMLInputElement | HTMLSelectElement>): HTMLElement {
    const row = el("label", "field");
    const caption = el("span");
    caption.textContent = field.label;
    row.appendChild(caption);
    if (field.kind === "select") {
      const select = el("select") as HTMLSelectElement;
      for (const option of field.options ?? []) {
        const item = el("option") as HTMLOptionElement;
        item.value = option;
        item.textContent = option;
        select.appendChild(item);
      }
      if (field.value !== undefined) select.value = String(field.value);
      if (field.readonly) select.disabled = true;
      sink.set(field.name, select);
      row.appendChild(select);
    } else {
      const box = input(field.name, field.label) as HTMLInputElement;
      box.type = field.kind === "number" ? "number" : "text";
      if (field.value !== undefined) box.value = String(field.value);
      if (field.readonly) box.readOnly = true;
      sink.set(field.name, box);
      row.appendChild(box);
    }
    return row;
  }

  private casePanel(screen: Screen, c: ConsoleController): HTMLElement {
    const opened = screen.openedCase!;
    const panel = el("div", "panel case");
    panel.appendChild(heading(`${opened.view.case_id} | ${opened.view.state}`));
    const meta = el("p", "meta");
    meta.textContent =
      `${opened.view.pathway} | borrower ${opened.view.party_labels.borrower} | ` +
      `bank ${opened.view.party_labels.bank} | guarantor ${opened.view.party_labels.cgi} | ` +
      `principal ${opened.view.principal}`;
    panel.appendChild(meta);
    if (opened.offers.length > 0) {
      panel.appendChild(heading("Risk line thread"));
      for (const offer of opened.offers) {
        const row = el("div", "offer");
        row.textContent = `t=${offer.time} ${offer.description}`;
        panel.appendChild(row);
      }
    }
    panel.appendChild(heading("Timeline"));
    for (const row of opened.timeline) {
      const line = el("div", "event");
      line.textContent = `t=${row.time} ${row.description}`;
      panel.appendChild(line);
    }
    const close = el("button") as HTMLButtonElement;
    close.textContent = "Close";
    close.onclick = () => c.closeCase();
    panel.appendChild(close);
    return panel;
  }

  private explorerPanel(screen: Screen): HTMLElement {
    const data = screen.explorer!;
    const panel = el("div", "panel explorer");
    panel.appendChild(heading(`Ledger (${data.height} blocks)`));
    for (const block of data.blocks.slice(-12).reverse()) {
      const row = el("div", "block");
      row.textContent =
        `#${block.height} txs=${block.transactions.length} votes=${block.finality_votes.length} ` +
        `root=${block.state_root.slice(0, 12)}`;
      panel.appendChild(row);
    }
    panel.appendChild(heading("Recent events"));
    for (const event of data.events.slice(-15).reverse()) {
      const row = el("div", "event");
      row.textContent = `seq=${event.seq} h=${event.height} ${event.case_id} ${event.event}`;
      panel.appendChild(row);
    }
    return panel;
  }
}

function el(tag: string, className = ""): HTMLElement {
  const element = document.createElement(tag);
  if (className) element.className = className;
  return element;
}

function heading(text: string): HTMLElement {
  const h = el("h3");
  h.textContent = text;
  return h;
}

function input(name: string, placeholder: string): HTMLInputElement {
  const box = document.createElement("input");
  box.name = name;
  box.placeholder = placeholder;
  return box;
}
