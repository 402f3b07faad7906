/** Wire types for the /v1 endpoints. */

export interface PowerResponse {
  powers: { wald_t: number; score_sm?: number; score_tang?: number };
  rho_w: number;
  rho_b: number;
  design_effect: number;
  var_beta: number;
  n: number;
  sequences: number[][];
  cluster_counts: number[];
}

export interface SampleSizeResponse {
  wald: number;
  sm: number;
  tang: number;
  exact: Record<string, number>;
  balanced: Record<string, boolean>;
  sequences: number[][];
  rho_w: number;
  rho_b: number;
  target_power: number;
}

export interface DesignValidateResponse {
  J: number;
  n: number;
  m: number;
  sequences: number[][];
  cluster_counts: number[];
  canonical: string;
}

export interface SensitivityResponse {
  tau_w_values: number[];
  ratio_values: number[];
  powers: Record<string, number[][]>;
}

export interface ApiErrorDetail {
  code: string;
  message: string;
  field?: string;
  fields?: { field: string; message: string }[];
}

export type ApiResult<T> =
  | { ok: true; data: T }
  | { ok: false; status: number; error: ApiErrorDetail };
