/** DOM wiring for the analyst console. All logic lives in console.ts;
 * this file only renders snapshots and forwards user events. */

import { ApiClient } from "./api.js";
import { Console, ConsoleSnapshot } from "./console.js";
import { classLabel, formatProbabilities } from "./panels.js";

const apiBase =
  (typeof localStorage !== "undefined" && localStorage.getItem("xnids_api")) ||
  "http://127.0.0.1:8000";

const ui = new Console(new ApiClient(apiBase));

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

let searchTerm = "";

function renderEditor(snap: ConsoleSnapshot): void {
  const host = byId("editor");
  host.textContent = "";
  if (!snap.view || !ui.meta) return;
  const view = snap.view;
  const meta = ui.meta;

  const groupOfColumn = new Map<string, string>();
  for (const [feat, g] of Object.entries(meta.groups)) {
    for (let k = 0; k < g.size; k++) {
      groupOfColumn.set(meta.encoded_columns[g.start + k], feat);
    }
  }

  for (const feat of meta.features) {
    if (searchTerm && !feat.name.toLowerCase().includes(searchTerm)) continue;
    const row = el("div", { class: "feature-row" });
    row.appendChild(el("label", {}, feat.name));
    if (feat.kind === "categorical") {
      const g = meta.groups[feat.name];
      const select = el("select");
      const current = g.categories.findIndex(
        (_, k) => view.values[g.start + k] > 0.5,
      );
      select.appendChild(el("option", { value: "" }, "(unseen)"));
      g.categories.forEach((cat, k) => {
        const opt = el("option", { value: cat }, cat);
        if (k === current) opt.selected = true;
        select.appendChild(opt);
      });
      select.addEventListener("change", () => {
        ui.selectCategory(feat.name, select.value || null);
      });
      row.appendChild(select);
    } else {
      const idx = view.columnOf(feat.name);
      const input = el("input", {
        type: "number",
        step: "0.01",
        min: "0",
        max: "1",
        value: view.values[idx].toFixed(4),
      });
      input.addEventListener("input", () => {
        ui.editFeature(feat.name, Number(input.value));
      });
      if (view.values[idx] !== view.loadedValues[idx]) {
        row.classList.add("edited");
      }
      row.appendChild(input);
    }
    host.appendChild(row);
  }
}

function renderPrediction(snap: ConsoleSnapshot): void {
  const host = byId("prediction");
  host.textContent = "";
  if (!snap.view) return;
  const p = snap.view.prediction;
  const badge = el("span", { class: `badge ${classLabel(p.class)}` },
    classLabel(p.class).toUpperCase());
  host.appendChild(badge);
  host.appendChild(el("span", {}, " " + formatProbabilities(p.probabilities)));
  host.appendChild(el("span", { class: "muted" },
    snap.view.dirty ? " (edited)" : ` (label: ${snap.view.rawLabel})`));
  if (snap.busy.predict) host.appendChild(el("span", { class: "muted" }, " …"));
}

function renderAttribution(snap: ConsoleSnapshot): void {
  const host = byId("attribution");
  host.textContent = "";
  if (!snap.attribution) return;
  const maxAbs = Math.max(...snap.attribution.bars.map((b) => Math.abs(b.phi)), 1e-12);
  for (const bar of snap.attribution.bars) {
    const row = el("div", { class: "bar-row" });
    row.appendChild(el("span", { class: "bar-label" },
      `${bar.feature} = ${bar.value.toFixed(3)}`));
    const width = (Math.abs(bar.phi) / maxAbs) * 100;
    const fill = el("div", {
      class: `bar ${bar.supportsAttack ? "attack" : "normal"}`,
      style: `width:${width.toFixed(1)}%`,
    }, bar.phi.toFixed(4));
    row.appendChild(fill);
    host.appendChild(row);
  }
}

function renderSuggestion(snap: ConsoleSnapshot): void {
  const host = byId("suggestion");
  host.textContent = "";
  if (!snap.suggestion) return;
  const s = snap.suggestion;
  host.appendChild(el("div", {},
    `${s.mode} -> ${classLabel(s.afterClass)} ` +
    `(converged: ${s.converged}${s.applied ? ", applied" : ""})`));
  const table = el("table");
  const head = el("tr");
  for (const h of ["feature", "from", "to"]) head.appendChild(el("th", {}, h));
  table.appendChild(head);
  for (const ch of s.changes) {
    const tr = el("tr");
    tr.appendChild(el("td", {}, ch.feature));
    tr.appendChild(el("td", {}, ch.original.toFixed(4)));
    tr.appendChild(el("td", {}, ch.new.toFixed(4)));
    table.appendChild(tr);
  }
  host.appendChild(table);
  if (s.converged && !s.applied) {
    const btn = el("button", {}, "apply suggestion");
    btn.addEventListener("click", () => void ui.applySuggestion());
    host.appendChild(btn);
  }
}

function renderPrototypes(snap: ConsoleSnapshot): void {
  const host = byId("prototypes");
  host.textContent = "";
  if (!snap.prototypes) return;
  const table = el("table");
  const head = el("tr");
  for (const h of ["#", "train row", "weight", "class", "label"]) {
    head.appendChild(el("th", {}, h));
  }
  table.appendChild(head);
  for (const p of snap.prototypes) {
    const tr = el("tr");
    tr.appendChild(el("td", {}, String(p.rank)));
    tr.appendChild(el("td", {}, String(p.trainIndex)));
    tr.appendChild(el("td", {}, p.weight.toFixed(4)));
    tr.appendChild(el("td", {}, classLabel(p.predictedClass)));
    tr.appendChild(el("td", {}, p.rawLabel));
    table.appendChild(tr);
  }
  host.appendChild(table);
}

function renderRules(snap: ConsoleSnapshot): void {
  const host = byId("rules");
  host.textContent = "";
  if (!snap.rules) return;
  for (const r of snap.rules) {
    const row = el("div", { class: r.fired ? "rule fired" : "rule" },
      `${r.fired ? "[FIRED] " : ""}${r.text} (train fires: ${r.fireCount})`);
    host.appendChild(row);
  }
}

ui.subscribe((snap) => {
  byId("error").textContent = snap.error ?? "";
  byId("edit-error").textContent = snap.editError ?? "";
  renderPrediction(snap);
  renderEditor(snap);
  renderAttribution(snap);
  renderSuggestion(snap);
  renderPrototypes(snap);
  renderRules(snap);
});

async function boot(): Promise<void> {
  await ui.init();
  byId("load").addEventListener("click", () => {
    const split = (byId("split") as HTMLSelectElement).value;
    const index = Number((byId("index") as HTMLInputElement).value);
    void ui.loadInstance(split, index);
  });
  byId("undo").addEventListener("click", () => ui.undoEdits());
  byId("search").addEventListener("input", () => {
    searchTerm = (byId("search") as HTMLInputElement).value.toLowerCase();
    ui.refresh();
  });
  byId("btn-shap").addEventListener("click", () => void ui.requestAttribution("shap"));
  byId("btn-lime").addEventListener("click", () => void ui.requestAttribution("lime"));
  byId("btn-pn").addEventListener("click", () => void ui.requestSuggestion("pn"));
  byId("btn-pp").addEventListener("click", () => void ui.requestSuggestion("pp"));
  byId("btn-protos").addEventListener("click", () => void ui.requestPrototypes(5));
  byId("btn-rules").addEventListener("click", () => void ui.requestRules());
  void ui.loadInstance("test", 0);
}

void boot();
