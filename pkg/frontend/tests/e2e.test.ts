/** End-to-end: the rendered views against the live HTTP service.
 *
 * Gated by SWPOWER_API (see scripts/e2e.sh, which boots the service first).
 * Reproduces the worked-example session: required clusters in clusters mode,
 * the design-matrix staircase, and the uploaded unbalanced design's power
 * view.
 */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { defaultState } from "../src/state.js";
import { powerBody, sampleSizeBody } from "../src/state.js";
import {
  designGrid,
  renderClustersResult,
  renderDesignMatrix,
  renderPowerResult,
} from "../src/views.js";
import type { DesignValidateResponse, PowerResponse, SampleSizeResponse } from "../src/types.js";

const BASE = process.env.SWPOWER_API;
const run = BASE ? describe : describe.skip;

const UNBALANCED_MATRIX = [
  "count,p1,p2,p3,p4,p5,p6",
  "4,0,1,1,1,1,1",
  "3,0,0,1,1,1,1",
  "4,0,0,0,1,1,1",
  "3,0,0,0,0,1,1",
  "4,0,0,0,0,0,1",
].join("\n");

run("worked-example session against the live service", () => {
  const api = new ApiClient(BASE ?? "");

  it("clusters mode renders 18 / 18 / 17 with g-ICCs 0.1 / 0.02", async () => {
    const result = await api.post<SampleSizeResponse>("/v1/samplesize", sampleSizeBody(defaultState));
    expect(result.ok).toBe(true);
    if (!result.ok) return;
    const html = renderClustersResult(result.data, defaultState);
    expect(html).toContain("18 / 18 / 17");
    expect(html).toContain("0.1 / 0.02");
  });

  it("the design matrix tab shows the 5x6 staircase", async () => {
    const result = await api.post<SampleSizeResponse>("/v1/samplesize", sampleSizeBody(defaultState));
    expect(result.ok).toBe(true);
    if (!result.ok) return;
    const grid = designGrid(result.data.sequences, result.data.sequences.map(() => 1), "sequence");
    const html = renderDesignMatrix(grid, defaultState.J);
    expect(grid.rows).toHaveLength(5);
    expect(html.match(/<td/g)).toHaveLength(30);
    expect(html.match(/class="on"/g)).toHaveLength(15);
    expect(html).toContain("evenly distributed");
  });

  it("an uploaded 18-cluster unbalanced design round-trips and yields 76/82/83", async () => {
    const validated = await api.post<DesignValidateResponse>("/v1/design/validate", {
      matrix: UNBALANCED_MATRIX,
      m: 35,
    });
    expect(validated.ok).toBe(true);
    if (!validated.ok) return;
    expect(validated.data.n).toBe(18);
    const again = await api.post<DesignValidateResponse>("/v1/design/validate", {
      matrix: validated.data.canonical,
      m: 35,
    });
    expect(again.ok).toBe(true);
    if (!again.ok) return;
    expect(again.data.sequences).toEqual(validated.data.sequences);
    expect(again.data.cluster_counts).toEqual(validated.data.cluster_counts);

    const state = {
      ...defaultState,
      display: "power" as const,
      designType: "upload" as const,
      uploadText: UNBALANCED_MATRIX,
      dofRule: "n-2" as const,
    };
    const result = await api.post<PowerResponse>("/v1/power", powerBody(state));
    expect(result.ok).toBe(true);
    if (!result.ok) return;
    expect(result.data.powers.wald_t).toBeCloseTo(0.76, 2);
    const html = renderPowerResult(result.data, state);
    expect(html).toContain("76.3% / 81.6% / 82.8%");
    const grid = designGrid(result.data.sequences, result.data.cluster_counts, "cluster");
    expect(grid.rows).toHaveLength(18);
  });

  it("server-side validation failures render as field-anchored errors", async () => {
    const result = await api.post("/v1/design/validate", { matrix: "0,1,0\n" });
    expect(result.ok).toBe(false);
    if (result.ok) return;
    expect(result.status).toBe(400);
    expect(result.error.code).toBe("invalid_design");
  });
});
