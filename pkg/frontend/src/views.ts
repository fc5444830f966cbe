/** DOM pages. Layout and event wiring only; data shaping lives in model.ts
 * and all decisions come from API responses. */

import { ApiClient, ApiError, type MePayload } from "./api.js";
import { drawPanel } from "./charts.js";
import { formatBytes, selectablePorts, statsToPanels, summarizeApply } from "./model.js";
import { allowAllRules, blockRules, mirrorAclRules, redirectRules,
         submitPeeringDraft, type PeeringDraft } from "./flow.js";

export function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, attrs: Record<string, string> = {}, ...children: (Node | string)[]):
    HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function errorBox(target: HTMLElement, exc: unknown): void {
  const message = exc instanceof ApiError
    ? `[${exc.code}] ${exc.message}` : String(exc);
  target.prepend(el("div", { class: "error" }, message));
  setTimeout(() => target.querySelector(".error")?.remove(), 6000);
}

export class StatusView {
  root = el("section", { class: "view" });
  private timer: number | undefined;

  constructor(private api: ApiClient) {}

  mount(): HTMLElement {
    this.refresh();
    this.timer = window.setInterval(() => this.refresh(), 2000);
    return this.root;
  }

  unmount(): void {
    window.clearInterval(this.timer);
  }

  private async refresh(): Promise<void> {
    try {
      const status = await this.api.status();
      const endpoints = Object.entries(status.endpoints).sort().map(([name, ep]) =>
        el("tr", {}, el("td", {}, name), el("td", {}, `${ep.host}:${ep.port}`),
           el("td", { class: ep.listening ? "ok" : "bad" },
              ep.listening ? "listening" : "down")));
      const roles = Object.entries(status.roles).sort().map(([role, live]) =>
        el("span", { class: `badge ${live ? "ok" : "bad"}` },
           `${role}: ${live ? "live" : "down"}`));
      const sessions = Object.entries(status.sessions).sort().map(([dp, s]) =>
        el("tr", {}, el("td", {}, dp), el("td", {}, s.state),
           el("td", {}, s.dp_id ?? "-"),
           el("td", {}, s.last_echo_rtt_ms == null ? "-" : `${s.last_echo_rtt_ms} ms`),
           el("td", { class: "mono" }, s.fingerprint || "-")));
      this.root.replaceChildren(
        el("h2", {}, "Controller status"),
        el("div", { class: "badges" }, ...roles),
        el("table", {},
           el("tr", {}, el("th", {}, "endpoint"), el("th", {}, "address"),
              el("th", {}, "state")), ...endpoints),
        el("p", {}, `CPU ${status.cpu_percent.toFixed(2)} %  ·  ` +
           `resident ${formatBytes(status.resident_memory_bytes)}  ·  ` +
           `virtual ${formatBytes(status.virtual_memory_bytes)}`),
        el("h3", {}, "Datapath sessions"),
        el("table", {},
           el("tr", {}, el("th", {}, "dp"), el("th", {}, "state"),
              el("th", {}, "dp_id"), el("th", {}, "echo rtt"),
              el("th", {}, "fingerprint")), ...sessions));
    } catch (exc) {
      errorBox(this.root, exc);
    }
  }
}

export class EditorView {
  root = el("section", { class: "view" });
  private yamlArea = el("textarea", { rows: "22", spellcheck: "false" });
  private report = el("pre", { class: "mono report" });

  constructor(private api: ApiClient) {}

  mount(): HTMLElement {
    const validateBtn = el("button", {}, "Validate");
    validateBtn.onclick = () => this.validate();
    const saveBtn = el("button", {}, "Stage YAML");
    saveBtn.onclick = () => this.stageYaml();
    const applyBtn = el("button", { class: "primary" }, "Apply");
    applyBtn.onclick = () => this.apply();
    const reloadBtn = el("button", {}, "Reload staged");
    reloadBtn.onclick = () => this.refresh();

    this.root.replaceChildren(
      el("h2", {}, "Configuration editor"),
      el("p", { class: "hint" },
         "Edits stage server-side; switches only change on Apply."),
      this.wizard(),
      el("h3", {}, "Staged YAML"),
      this.yamlArea,
      el("div", { class: "buttons" }, reloadBtn, validateBtn, saveBtn, applyBtn),
      this.report);
    this.refresh();
    return this.root;
  }

  unmount(): void {}

  private wizard(): HTMLElement {
    const vlanName = el("input", { value: "office" });
    const vlanVid = el("input", { value: "100", type: "number" });
    const swName = el("input", { value: "sw1" });
    const swDpid = el("input", { value: "0x1" });
    const nPorts = el("input", { value: "4", type: "number" });
    const aclKind = el("select", {},
                       el("option", { value: "mirror" }, "mirror"),
                       el("option", { value: "block" }, "block"),
                       el("option", { value: "redirect" }, "redirect"),
                       el("option", { value: "none" }, "none"));
    const aclPort = el("input", { value: "2", type: "number", title: "apply on port" });
    const aclTarget = el("input", { value: "4", type: "number", title: "mirror/redirect to" });
    const submit = el("button", { class: "primary" }, "Create + apply");

    submit.onclick = async () => {
      try {
        const ports = Number(nPorts.value);
        const kind = aclKind.value;
        const draft: PeeringDraft = {
          vlan: { name: vlanName.value, vid: Number(vlanVid.value) },
          datapath: { name: swName.value, dp_id: Number(swDpid.value) },
          interfaces: Array.from({ length: ports }, (_, i) => ({
            port: i + 1, name: `AS${i + 1}`, native_vlan: vlanName.value,
            acls_in: kind !== "none" && i + 1 === Number(aclPort.value)
              ? [kind, "allow-all"] : [],
          })),
          acls: kind === "none" ? [] : [
            { name: kind, rules: kind === "mirror" ? mirrorAclRules(Number(aclTarget.value))
              : kind === "redirect" ? redirectRules(Number(aclTarget.value))
              : blockRules(0x800) },
            { name: "allow-all", rules: allowAllRules() },
          ],
        };
        const report = await submitPeeringDraft(this.api, draft);
        this.report.textContent = summarizeApply(report);
        this.refresh();
      } catch (exc) {
        errorBox(this.root, exc);
      }
    };

    return el("fieldset", {},
              el("legend", {}, "New peering (VLAN → switch → interfaces → ACL)"),
              el("div", { class: "grid" },
                 el("label", {}, "VLAN name", vlanName),
                 el("label", {}, "VLAN id", vlanVid),
                 el("label", {}, "switch", swName),
                 el("label", {}, "dp_id", swDpid),
                 el("label", {}, "ports", nPorts),
                 el("label", {}, "ACL", aclKind),
                 el("label", {}, "on port", aclPort),
                 el("label", {}, "target port", aclTarget)),
              submit);
  }

  private async refresh(): Promise<void> {
    try {
      this.yamlArea.value = await this.api.configYaml("staged");
      const cfg = await this.api.config();
      this.report.textContent = cfg.dirty
        ? `staged ${cfg.staged_fingerprint} differs from active ${cfg.active_fingerprint}`
        : `staged == active (${cfg.active_fingerprint})`;
    } catch (exc) {
      errorBox(this.root, exc);
    }
  }

  private async validate(): Promise<void> {
    try {
      const report = await this.api.validateConfig();
      this.report.textContent = report.ok ? "valid"
        : JSON.stringify(report.violations, null, 2);
    } catch (exc) {
      errorBox(this.root, exc);
    }
  }

  private async stageYaml(): Promise<void> {
    try {
      await this.api.putConfigYaml(this.yamlArea.value);
      await this.refresh();
    } catch (exc) {
      errorBox(this.root, exc);
    }
  }

  private async apply(): Promise<void> {
    try {
      const report = await this.api.applyConfig();
      this.report.textContent = summarizeApply(report);
      await this.refresh();
    } catch (exc) {
      errorBox(this.root, exc);
    }
  }
}

export class StatsView {
  root = el("section", { class: "view" });
  private selector = el("select", {});
  private windowSel = el("select", {},
                         el("option", { value: "60" }, "60 s"),
                         el("option", { value: "300" }, "5 min"),
                         el("option", { value: "3600" }, "1 h"));
  private canvases = Array.from({ length: 4 }, () =>
    el("canvas", { width: "460", height: "140" }));
  private timer: number | undefined;

  constructor(private api: ApiClient, private me: MePayload) {}

  mount(): HTMLElement {
    this.root.replaceChildren(
      el("h2", {}, "Traffic"),
      el("div", { class: "buttons" },
         el("label", {}, "port ", this.selector),
         el("label", {}, "window ", this.windowSel)),
      el("div", { class: "panels" }, ...this.canvases));
    this.populatePorts();
    this.timer = window.setInterval(() => this.refresh(), 3000);
    return this.root;
  }

  unmount(): void {
    window.clearInterval(this.timer);
  }

  private async populatePorts(): Promise<void> {
    let all: { dp: string; port: number }[] = [];
    if (this.me.role !== "customer") {
      const cfg = await this.api.config() as
        { active: { dps: Record<string, { interfaces: Record<string, unknown> }> } };
      all = Object.entries(cfg.active.dps).flatMap(([dp, d]) =>
        Object.keys(d.interfaces).map((p) => ({ dp, port: Number(p) })));
    }
    const ports = selectablePorts(this.me.role, this.me.ports, all);
    this.selector.replaceChildren(...ports.map((p) =>
      el("option", { value: `${p.dp}/${p.port}` }, `${p.dp} port ${p.port}`)));
    this.refresh();
  }

  private async refresh(): Promise<void> {
    const selected = this.selector.value;
    if (!selected) return;
    const [dp, port] = selected.split("/");
    try {
      const payload = await this.api.portStats(dp, Number(port),
                                               Number(this.windowSel.value));
      if (payload === null) {
        this.canvases.forEach((c) => {
          const ctx = c.getContext("2d");
          ctx?.clearRect(0, 0, c.width, c.height);
          ctx && (ctx.fillStyle = "#475569",
                  ctx.fillText("no data yet", 20, c.height / 2));
        });
        return;
      }
      statsToPanels(payload).forEach((panel, i) => drawPanel(this.canvases[i], panel));
    } catch (exc) {
      errorBox(this.root, exc);
    }
  }
}

export class UsersView {
  root = el("section", { class: "view" });

  constructor(private api: ApiClient) {}

  mount(): HTMLElement {
    this.refresh();
    return this.root;
  }

  unmount(): void {}

  private async refresh(): Promise<void> {
    try {
      const { users } = await this.api.users();
      const rows = users.map((u) =>
        el("tr", {}, el("td", {}, u.username), el("td", {}, u.role),
           el("td", {}, u.ports.map((p) => `${p.dp}/${p.port}`).join(", ") || "-"),
           el("td", { class: "mono" }, u.token),
           this.deleteCell(u.username)));
      const name = el("input", { placeholder: "username" });
      const role = el("select", {}, el("option", {}, "admin"),
                      el("option", {}, "moderator"), el("option", {}, "customer"));
      const add = el("button", {}, "Create");
      add.onclick = async () => {
        try {
          await this.api.createUser({ username: name.value, role: role.value });
          this.refresh();
        } catch (exc) {
          errorBox(this.root, exc);
        }
      };
      this.root.replaceChildren(
        el("h2", {}, "Users"),
        el("table", {},
           el("tr", {}, el("th", {}, "username"), el("th", {}, "role"),
              el("th", {}, "ports"), el("th", {}, "token"), el("th", {}, "")),
           ...rows),
        el("div", { class: "buttons" }, name, role, add));
    } catch (exc) {
      errorBox(this.root, exc);
    }
  }

  private deleteCell(username: string): HTMLElement {
    const btn = el("button", { class: "danger" }, "delete");
    btn.onclick = async () => {
      try {
        await this.api.deleteObject("users", username);
        this.refresh();
      } catch (exc) {
        errorBox(this.root, exc);
      }
    };
    return el("td", {}, btn);
  }
}
