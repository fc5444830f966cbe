/** Bootstrap: token login, tab routing, role-gated navigation. */

import { ApiClient, type MePayload } from "./api.js";
import { visibleTabs, type Tab } from "./model.js";
import { EditorView, StatsView, StatusView, UsersView, el } from "./views.js";

interface View {
  mount(): HTMLElement;
  unmount(): void;
}

function loginForm(onLogin: (api: ApiClient, me: MePayload) => void): HTMLElement {
  const token = el("input", { type: "password", placeholder: "bearer token" });
  const message = el("p", { class: "error hidden" });
  const submit = el("button", { class: "primary" }, "Sign in");
  const form = el("section", { class: "login" },
                  el("h1", {}, "IXP fabric dashboard"), token, submit, message);
  submit.onclick = async () => {
    const api = new ApiClient("", token.value.trim());
    try {
      const me = await api.me();
      localStorage.setItem("sdx-token", api.token);
      onLogin(api, me);
    } catch {
      message.textContent = "token rejected";
      message.classList.remove("hidden");
    }
  };
  const saved = localStorage.getItem("sdx-token");
  if (saved) {
    token.value = saved;
    submit.click();
  }
  return form;
}

function shell(api: ApiClient, me: MePayload): HTMLElement {
  const tabs = visibleTabs(me.role);
  const makers: Record<Tab, () => View> = {
    status: () => new StatusView(api),
    editor: () => new EditorView(api),
    stats: () => new StatsView(api, me),
    users: () => new UsersView(api),
  };
  const container = el("main", {});
  const nav = el("nav", {});
  let current: View | null = null;

  const show = (tab: Tab) => {
    current?.unmount();
    current = makers[tab]();
    container.replaceChildren(current.mount());
    nav.querySelectorAll("button").forEach((b) =>
      b.classList.toggle("active", b.dataset.tab === tab));
  };
  for (const tab of tabs) {
    const btn = el("button", { "data-tab": tab }, tab);
    btn.onclick = () => show(tab);
    nav.append(btn);
  }
  const logout = el("button", { class: "logout" }, `${me.username} · sign out`);
  logout.onclick = () => {
    localStorage.removeItem("sdx-token");
    location.reload();
  };
  nav.append(logout);
  show(tabs[0]);
  return el("div", { class: "shell" }, nav, container);
}

document.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("app");
  if (!root) return;
  root.replaceChildren(loginForm((api, me) => {
    root.replaceChildren(shell(api, me));
  }));
});
