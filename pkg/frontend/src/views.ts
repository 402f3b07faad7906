/** HTML renderers: response JSON in, markup out.
 *
 * Every displayed number is the server's value, formatted but never
 * recomputed; the snapshot tests compare the rendered digits against the
 * response bodies directly.
 */

import type {
  ApiErrorDetail,
  PowerResponse,
  SampleSizeResponse,
  SensitivityResponse,
} from "./types.js";
import type { InputPanelState } from "./state.js";

const METHOD_LABELS: Record<string, string> = {
  wald_t: "Wald t-test",
  score_sm: "Self and Mauritsen robust score",
  score_tang: "Tang robust score",
};

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Trim a server value for prose: 0.1041 -> "0.1", 0.0157 -> "0.02". */
export function formatRounded(value: number, decimals = 2): string {
  return String(parseFloat(value.toFixed(decimals)));
}

export function formatPercent(value: number): string {
  return `${parseFloat((value * 100).toFixed(1))}%`;
}

export function renderClustersResult(resp: SampleSizeResponse, state: InputPanelState): string {
  const counts = `${resp.wald} / ${resp.sm} / ${resp.tang}`;
  const giccs = `${formatRounded(resp.rho_w)} / ${formatRounded(resp.rho_b)}`;
  const sentence =
    `For a stepped wedge trial to obtain at least ${formatPercent(resp.target_power)} power ` +
    `with J=${state.J} periods and m=${state.m} participants per cluster-period, the study would need: ` +
    `n=${resp.wald} clusters under the Wald z-testing paradigm, ` +
    `n=${resp.sm} clusters under the Self and Mauritsen robust score testing paradigm, and ` +
    `n=${resp.tang} clusters under the Tang robust score testing paradigm.`;
  const gsentence =
    `The within-period generalized ICC is estimated to be ${formatRounded(resp.rho_w)} ` +
    `and the between-period generalized ICC is estimated to be ${formatRounded(resp.rho_b)}.`;
  const caveat = Object.values(resp.balanced).every(Boolean)
    ? ""
    : `<p class="note">Some cluster counts do not divide evenly over the ${resp.sequences.length} ` +
      `sequences; re-check power under an explicit unbalanced design on the Design Matrix tab.</p>`;
  return `
    <div class="result" data-kind="clusters">
      <p class="headline">Required clusters (Wald / S&amp;M / Tang): <strong>${counts}</strong></p>
      <p class="headline">Generalized ICCs (within / between): <strong>${giccs}</strong></p>
      <p>${sentence}</p>
      <p>${gsentence}</p>
      ${caveat}
    </div>`;
}

export function renderPowerResult(resp: PowerResponse, state: InputPanelState): string {
  const parts: string[] = [];
  const summary: string[] = [];
  for (const [method, value] of Object.entries(resp.powers)) {
    if (value === undefined) continue;
    parts.push(`${formatPercent(value)} power under the ${METHOD_LABELS[method] ?? method} paradigm`);
    summary.push(formatPercent(value));
  }
  const giccs = `${formatRounded(resp.rho_w)} / ${formatRounded(resp.rho_b)}`;
  return `
    <div class="result" data-kind="power">
      <p class="headline">Predicted power (Wald / S&amp;M / Tang): <strong>${summary.join(" / ")}</strong></p>
      <p class="headline">Generalized ICCs (within / between): <strong>${giccs}</strong></p>
      <p>With n=${resp.n} clusters, J=${state.J} periods, and m=${state.m} participants per
      cluster-period, we estimate ${parts.join(", ")}.</p>
      <p>The within-period generalized ICC is estimated to be ${formatRounded(resp.rho_w)}
      and the between-period generalized ICC is estimated to be ${formatRounded(resp.rho_b)}.</p>
    </div>`;
}

export interface DesignGrid {
  rows: number[][];
  rowLabels: string[];
  note: string;
}

/** Sequence-level staircase in clusters mode, cluster-level rows otherwise. */
export function designGrid(
  sequences: number[][],
  clusterCounts: number[],
  mode: "sequence" | "cluster",
): DesignGrid {
  if (mode === "sequence") {
    return {
      rows: sequences,
      rowLabels: sequences.map((_, i) => `Sequence ${i + 1}`),
      note:
        "*Calculations assume the total number of clusters from the Results tab " +
        "is evenly distributed to each of the above sequences.",
    };
  }
  const rows: number[][] = [];
  const rowLabels: string[] = [];
  sequences.forEach((seq, i) => {
    const count = clusterCounts[i] ?? 1;
    for (let c = 0; c < count; c++) {
      rows.push(seq);
      rowLabels.push(`Cluster ${rows.length}`);
    }
  });
  return { rows, rowLabels, note: "" };
}

export function renderDesignMatrix(grid: DesignGrid, J: number): string {
  const header =
    "<tr><th></th>" +
    Array.from({ length: J }, (_, j) => `<th>Period ${j + 1}</th>`).join("") +
    "</tr>";
  const body = grid.rows
    .map((row, i) => {
      const cells = row
        .map((v) => `<td class="${v === 1 ? "on" : "off"}">${v}</td>`)
        .join("");
      return `<tr><th>${grid.rowLabels[i]}</th>${cells}</tr>`;
    })
    .join("");
  const note = grid.note ? `<p class="note">${grid.note}</p>` : "";
  return `<table class="design">${header}${body}</table>${note}`;
}

/** Monotone grayscale: darker cells mean more power, identically per method. */
export function powerShade(value: number): string {
  const clamped = Math.max(0, Math.min(1, value));
  const channel = Math.round(235 - 165 * clamped);
  return `rgb(${channel}, ${channel + 10}, ${channel})`;
}

export function renderSensitivity(resp: SensitivityResponse): string {
  const cell = 34;
  const blocks = Object.entries(resp.powers).map(([method, grid]) => {
    const width = resp.ratio_values.length * cell;
    const height = resp.tau_w_values.length * cell;
    const cells = grid
      .flatMap((row, i) =>
        row.map((value, k) => {
          const title = `tau_w=${resp.tau_w_values[i]}, tau_b/tau_w=${resp.ratio_values[k]}: power ${value}`;
          return (
            `<rect x="${k * cell}" y="${i * cell}" width="${cell}" height="${cell}" ` +
            `fill="${powerShade(value)}" data-power="${value}">` +
            `<title>${escapeHtml(title)}</title></rect>`
          );
        }),
      )
      .join("");
    return `
      <figure class="contour" data-method="${method}">
        <figcaption>${METHOD_LABELS[method] ?? method}</figcaption>
        <svg viewBox="0 0 ${width} ${height}" width="${width}" height="${height}"
             role="img" aria-label="power contour for ${method}">${cells}</svg>
      </figure>`;
  });
  return `<div class="contours">${blocks.join("")}</div>`;
}

export function renderError(error: ApiErrorDetail): string {
  const fields = (error.fields ?? [])
    .map((f) => `<li data-field="${escapeHtml(f.field)}">${escapeHtml(f.field)}: ${escapeHtml(f.message)}</li>`)
    .join("");
  const anchored = error.field
    ? `<p data-field="${escapeHtml(error.field)}">${escapeHtml(error.field)}: ${escapeHtml(error.message)}</p>`
    : `<p>${escapeHtml(error.message)}</p>`;
  return `
    <div class="error" data-code="${escapeHtml(error.code)}">
      ${anchored}
      ${fields ? `<ul>${fields}</ul>` : ""}
    </div>`;
}

export function renderLoading(): string {
  return `<div class="loading">Calculating&hellip;</div>`;
}
