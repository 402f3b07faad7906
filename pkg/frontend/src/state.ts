/** Input panel state, client-side validation, and request-body builders.
 *
 * Validation mirrors the server rules so invalid combinations never leave the
 * browser; the server remains the source of truth and its 400s are still
 * rendered when they occur.
 */

export type OutputDisplay = "power" | "clusters";
export type DesignType = "balanced" | "upload";
export type HazardMode = "constant" | "change";
export type DofRule = "n-1" | "n-2";

export interface InputPanelState {
  display: OutputDisplay;
  designType: DesignType;
  uploadText: string;
  J: number;
  m: number;
  n: number;
  targetPower: number;
  effect: number; // log hazard ratio
  tauW: number;
  tauB: number;
  adminCensoring: number;
  hazardMode: HazardMode;
  hazardChange: number;
  alpha: number;
  dofRule: DofRule;
}

export const defaultState: InputPanelState = {
  display: "clusters",
  designType: "balanced",
  uploadText: "",
  J: 6,
  m: 35,
  n: 15,
  targetPower: 0.8,
  effect: 0.4,
  tauW: 0.1,
  tauB: 0.05,
  adminCensoring: 0.05,
  hazardMode: "change",
  hazardChange: 0.05,
  alpha: 0.05,
  dofRule: "n-1",
};

export type ValidationErrors = Partial<Record<keyof InputPanelState, string>>;

export function validate(state: InputPanelState): ValidationErrors {
  const errors: ValidationErrors = {};
  if (!Number.isInteger(state.J) || state.J < 2) {
    errors.J = "need at least 2 periods";
  }
  if (!Number.isInteger(state.m) || state.m < 1) {
    errors.m = "cluster-period size must be a positive integer";
  }
  if (state.display === "power" && state.designType === "balanced") {
    if (!Number.isInteger(state.n) || state.n < state.J - 1) {
      errors.n = `need at least ${state.J - 1} clusters (one per sequence)`;
    } else if (state.n % (state.J - 1) !== 0) {
      errors.n = `${state.n} clusters do not divide evenly over ${state.J - 1} sequences; upload an unbalanced design instead`;
    }
  }
  if (state.display === "power" && state.designType === "upload" && !state.uploadText.trim()) {
    errors.uploadText = "paste or upload a design matrix";
  }
  if (!(state.alpha > 0 && state.alpha < 1)) {
    errors.alpha = "significance level must be in (0, 1)";
  }
  if (state.display === "clusters") {
    if (!(state.targetPower > state.alpha && state.targetPower < 1)) {
      errors.targetPower = "target power must lie between the significance level and 1";
    }
    if (state.effect === 0) {
      errors.effect = "a nonzero effect size is required to solve for clusters";
    }
  }
  if (!(state.tauW >= 0 && state.tauW < 1)) {
    errors.tauW = "within-period Kendall's tau must be in [0, 1)";
  }
  if (!(state.tauB >= 0 && state.tauB < 1)) {
    errors.tauB = "between-period Kendall's tau must be in [0, 1)";
  } else if (state.tauB > state.tauW) {
    errors.tauB = "between-period tau cannot exceed within-period tau";
  }
  if (!(state.adminCensoring > 0 && state.adminCensoring < 1)) {
    errors.adminCensoring = "administrative censoring proportion must be in (0, 1)";
  }
  if (state.hazardMode === "change" && !errors.J && !errors.adminCensoring) {
    const lambda0 = -Math.log(state.adminCensoring);
    const last = lambda0 + state.hazardChange * (state.J - 1);
    if (last <= 0) {
      errors.hazardChange = "this change constant drives a period's baseline hazard below zero";
    }
  }
  return errors;
}

export function isValid(state: InputPanelState): boolean {
  return Object.keys(validate(state)).length === 0;
}

/** Switch display mode, preserving every shared field. */
export function setDisplay(state: InputPanelState, display: OutputDisplay): InputPanelState {
  return { ...state, display };
}

function trendOf(state: InputPanelState): number {
  return state.hazardMode === "constant" ? 0 : state.hazardChange;
}

function designOf(state: InputPanelState): Record<string, unknown> {
  if (state.designType === "upload" && state.uploadText.trim()) {
    return { J: state.J, m: state.m, matrix: state.uploadText };
  }
  const body: Record<string, unknown> = { J: state.J, m: state.m };
  if (state.display === "power") {
    body.n = state.n;
  }
  return body;
}

function studyBody(state: InputPanelState): Record<string, unknown> {
  return {
    design: designOf(state),
    beta: state.effect,
    tau_w: state.tauW,
    tau_b: state.tauB,
    pa: state.adminCensoring,
    trend: trendOf(state),
    alpha: state.alpha,
    dof_rule: state.dofRule,
  };
}

export function powerBody(state: InputPanelState): Record<string, unknown> {
  return studyBody(state);
}

export function sampleSizeBody(state: InputPanelState): Record<string, unknown> {
  return { ...studyBody(state), target_power: state.targetPower };
}

export function sensitivityBody(
  state: InputPanelState,
  tauWValues: number[],
  ratioValues: number[],
): Record<string, unknown> {
  if (tauWValues.length === 0 || ratioValues.length === 0) {
    throw new Error("sensitivity grid needs at least one tau_w and one ratio value");
  }
  const body = studyBody(state);
  const design = body.design as Record<string, unknown>;
  if (!("n" in design) && !("matrix" in design)) {
    design.n = state.n;
  }
  return { ...body, tau_w_values: tauWValues, ratio_values: ratioValues };
}

/** Evenly spaced grid endpoints for the sensitivity view. */
export function gridRange(upper: number, count: number): number[] {
  if (!(upper > 0) || count < 1) {
    throw new Error("sensitivity range must be positive with at least one point");
  }
  if (count === 1) {
    return [0];
  }
  return Array.from({ length: count }, (_, i) => (upper * i) / (count - 1));
}
