/** DOM wiring: form state, tabs, requests, rendering. */

import { ApiClient, LatestRequestGuard } from "./api.js";
import {
  InputPanelState,
  defaultState,
  gridRange,
  isValid,
  powerBody,
  sampleSizeBody,
  sensitivityBody,
  validate,
} from "./state.js";
import type {
  DesignValidateResponse,
  PowerResponse,
  SampleSizeResponse,
  SensitivityResponse,
} from "./types.js";
import {
  designGrid,
  renderClustersResult,
  renderDesignMatrix,
  renderError,
  renderLoading,
  renderPowerResult,
  renderSensitivity,
} from "./views.js";

const api = new ApiClient((window as any).SWPOWER_API ?? "http://127.0.0.1:8000");
const resultsGuard = new LatestRequestGuard();
const sensitivityGuard = new LatestRequestGuard();

let state: InputPanelState = { ...defaultState };
let lastDesign: { sequences: number[][]; counts: number[] } | null = null;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element ${id}`);
  return el as T;
};

function numberField(id: keyof InputPanelState, label: string, step: string): string {
  return `
    <label data-for="${id}"><span>${label}</span>
      <input id="${id}" type="number" step="${step}" value="${state[id]}" />
      <em class="field-error" id="err-${id}"></em>
    </label>`;
}

function renderForm(): string {
  return `
    <label><span>Output display</span>
      <select id="display">
        <option value="clusters" ${state.display === "clusters" ? "selected" : ""}>Number of clusters (n)</option>
        <option value="power" ${state.display === "power" ? "selected" : ""}>Power</option>
      </select>
    </label>
    <div id="power-only" class="${state.display === "power" ? "" : "hidden"}">
      <label><span>Design type</span>
        <select id="designType">
          <option value="balanced" ${state.designType === "balanced" ? "selected" : ""}>Balanced</option>
          <option value="upload" ${state.designType === "upload" ? "selected" : ""}>Unbalanced (upload your own design)</option>
        </select>
      </label>
      ${numberField("n", "Number of clusters (n)", "1")}
      <div id="upload-block" class="${state.designType === "upload" ? "" : "hidden"}">
        <label><span>Design matrix CSV</span>
          <textarea id="uploadText" rows="6" placeholder="count,p1,p2,...&#10;4,0,1,1,...">${state.uploadText}</textarea>
          <input id="uploadFile" type="file" accept=".csv,text/csv" />
          <em class="field-error" id="err-uploadText"></em>
        </label>
      </div>
    </div>
    ${numberField("m", "Cluster-period size (m)", "1")}
    ${numberField("J", "Number of time periods (J)", "1")}
    <div id="clusters-only" class="${state.display === "clusters" ? "" : "hidden"}">
      ${numberField("targetPower", "Power", "0.01")}
    </div>
    ${numberField("effect", "Treatment effect size (log hazard ratio)", "0.05")}
    ${numberField("tauW", "Within-period Kendall's tau", "0.01")}
    ${numberField("tauB", "Between-period Kendall's tau", "0.01")}
    ${numberField("adminCensoring", "Administrative censoring (proportion)", "0.01")}
    <label><span>Baseline hazard</span>
      <select id="hazardMode">
        <option value="constant" ${state.hazardMode === "constant" ? "selected" : ""}>Constant</option>
        <option value="change" ${state.hazardMode === "change" ? "selected" : ""}>Change by constant over time</option>
      </select>
    </label>
    <div id="hazard-change-block" class="${state.hazardMode === "change" ? "" : "hidden"}">
      ${numberField("hazardChange", "Baseline hazard change constant", "0.01")}
    </div>
    ${numberField("alpha", "Significance level", "0.01")}
    <div id="dof-block" class="${state.display === "power" ? "" : "hidden"}">
      <label><span>Degrees of freedom</span>
        <select id="dofRule">
          <option value="n-1" ${state.dofRule === "n-1" ? "selected" : ""}>(n-1)</option>
          <option value="n-2" ${state.dofRule === "n-2" ? "selected" : ""}>(n-2)</option>
        </select>
      </label>
    </div>
    <button id="submit" type="button">Update view</button>`;
}

function readForm(): void {
  const num = (id: string) => parseFloat(($(id) as HTMLInputElement).value);
  state = {
    ...state,
    display: ($("display") as HTMLSelectElement).value as InputPanelState["display"],
    designType: ($("designType") as HTMLSelectElement).value as InputPanelState["designType"],
    uploadText: ($("uploadText") as HTMLTextAreaElement).value,
    J: num("J"),
    m: num("m"),
    n: num("n"),
    targetPower: num("targetPower"),
    effect: num("effect"),
    tauW: num("tauW"),
    tauB: num("tauB"),
    adminCensoring: num("adminCensoring"),
    hazardMode: ($("hazardMode") as HTMLSelectElement).value as InputPanelState["hazardMode"],
    hazardChange: num("hazardChange"),
    alpha: num("alpha"),
    dofRule: ($("dofRule") as HTMLSelectElement).value as InputPanelState["dofRule"],
  };
}

function refreshValidation(): void {
  const errors = validate(state);
  document.querySelectorAll<HTMLElement>(".field-error").forEach((el) => (el.textContent = ""));
  for (const [field, message] of Object.entries(errors)) {
    const slot = document.getElementById(`err-${field}`);
    if (slot) slot.textContent = message ?? "";
  }
  ($("submit") as HTMLButtonElement).disabled = Object.keys(errors).length > 0;
  $("power-only").classList.toggle("hidden", state.display !== "power");
  $("clusters-only").classList.toggle("hidden", state.display !== "clusters");
  $("dof-block").classList.toggle("hidden", state.display !== "power");
  $("upload-block").classList.toggle("hidden", state.designType !== "upload");
  $("hazard-change-block").classList.toggle("hidden", state.hazardMode !== "change");
}

function refreshDesignTab(): void {
  const target = $("design-view");
  if (!lastDesign) {
    target.innerHTML = `<p class="note">Run a calculation first; the schedule it used appears here.</p>`;
    return;
  }
  const mode = state.display === "clusters" ? "sequence" : "cluster";
  const grid = designGrid(lastDesign.sequences, lastDesign.counts, mode);
  target.innerHTML = renderDesignMatrix(grid, state.J);
}

async function submit(): Promise<void> {
  readForm();
  if (!isValid(state)) {
    refreshValidation();
    return;
  }
  const view = $("results-view");
  view.innerHTML = renderLoading();
  const token = resultsGuard.begin();
  if (state.display === "clusters") {
    const result = await api.post<SampleSizeResponse>("/v1/samplesize", sampleSizeBody(state));
    if (!resultsGuard.isCurrent(token)) return;
    if (!result.ok) {
      view.innerHTML = renderError(result.error);
      return;
    }
    lastDesign = { sequences: result.data.sequences, counts: result.data.sequences.map(() => 1) };
    view.innerHTML = renderClustersResult(result.data, state);
  } else {
    const result = await api.post<PowerResponse>("/v1/power", powerBody(state));
    if (!resultsGuard.isCurrent(token)) return;
    if (!result.ok) {
      view.innerHTML = renderError(result.error);
      return;
    }
    lastDesign = { sequences: result.data.sequences, counts: result.data.cluster_counts };
    view.innerHTML = renderPowerResult(result.data, state);
  }
  refreshDesignTab();
}

async function updateSensitivity(): Promise<void> {
  readForm();
  const out = $("sensitivity-view");
  const upper = parseFloat(($("sens-upper") as HTMLInputElement).value);
  const points = parseInt(($("sens-points") as HTMLInputElement).value, 10);
  let tauW: number[];
  let ratios: number[];
  try {
    tauW = gridRange(upper, points);
    ratios = gridRange(1.0, points);
  } catch (err) {
    out.innerHTML = renderError({ code: "invalid_range", message: String(err) });
    return;
  }
  out.innerHTML = renderLoading();
  const token = sensitivityGuard.begin();
  const result = await api.post<SensitivityResponse>(
    "/v1/sensitivity",
    sensitivityBody(state, tauW, ratios),
  );
  if (!sensitivityGuard.isCurrent(token)) return;
  out.innerHTML = result.ok ? renderSensitivity(result.data) : renderError(result.error);
}

async function validateUpload(): Promise<void> {
  readForm();
  if (!state.uploadText.trim()) return;
  const result = await api.post<DesignValidateResponse>("/v1/design/validate", {
    matrix: state.uploadText,
    m: state.m,
  });
  const slot = $("err-uploadText");
  if (!result.ok) {
    slot.textContent = result.error.message;
    return;
  }
  slot.textContent = "";
  lastDesign = { sequences: result.data.sequences, counts: result.data.cluster_counts };
  refreshDesignTab();
}

function switchTab(name: string): void {
  document.querySelectorAll<HTMLElement>(".tab").forEach((el) => {
    el.classList.toggle("active", el.dataset.tab === name);
  });
  document.querySelectorAll<HTMLElement>(".tab-page").forEach((el) => {
    el.classList.toggle("hidden", el.id !== `tab-${name}`);
  });
}

export function boot(): void {
  $("input-panel").innerHTML = renderForm();
  refreshValidation();
  refreshDesignTab();

  $("input-panel").addEventListener("input", () => {
    readForm();
    refreshValidation();
  });
  $("uploadText").addEventListener("change", () => void validateUpload());
  $("uploadFile").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    ($("uploadText") as HTMLTextAreaElement).value = await file.text();
    await validateUpload();
  });
  $("submit").addEventListener("click", () => void submit());
  $("sens-update").addEventListener("click", () => void updateSensitivity());
  document.querySelectorAll<HTMLElement>(".tab").forEach((el) => {
    el.addEventListener("click", () => switchTab(el.dataset.tab ?? "results"));
  });
}

if (typeof document !== "undefined" && document.getElementById("input-panel")) {
  boot();
}
