/** Wire types mirroring the service's published JSON schemas. */

export interface FeatureInfo {
  name: string;
  kind: "continuous" | "discrete" | "binary" | "categorical";
}

export interface GroupInfo {
  start: number;
  size: number;
  categories: string[];
}

export interface Meta {
  encoded_columns: string[];
  features: FeatureInfo[];
  groups: Record<string, GroupInfo>;
  col_min: number[];
  col_max: number[];
  splits: Record<string, number>;
  model_fingerprint: string;
  schema_id: string;
  seed: number;
}

export interface Prediction {
  probabilities: number[]; // [p_normal, p_attack]
  class: number;
}

export interface InstanceRow {
  index: number;
  split: string;
  encoded: number[];
  raw: Record<string, number | string | null>;
  label: number;
  raw_label: string;
  predicted_class: number;
  probabilities: number[];
}

export interface InstancesPage {
  split: string;
  offset: number;
  total: number;
  rows: InstanceRow[];
}

export interface Attribution {
  method: "shap" | "lime";
  feature_names: string[];
  phi: number[];
  base_value: number;
  model_output: number;
  target_class: number;
  instance: number[];
  seed?: number;
}

export interface ChangedFeature {
  feature: string;
  original: number;
  new: number;
}

export interface ContrastResult {
  mode: "PN" | "PP";
  delta: number[];
  changed_features: ChangedFeature[];
  prediction_before: { class: number; probabilities: number[] };
  prediction_after: { class: number; probabilities: number[] };
  converged: boolean;
  final_objective: number;
  l1: number;
  l2: number;
}

export interface PrototypeEntry {
  rank: number;
  train_index: number;
  weight: number;
  predicted_class: number;
  raw_label: string;
  values: number[];
}

export interface PrototypesResult {
  query_class: number;
  pool_size: number;
  objective_trace: number[];
  prototypes: PrototypeEntry[];
}

export interface RuleClause {
  index: number;
  text: string;
  n_literals: number;
  train_fire_count: number;
}

export interface RulesInfo {
  text: string;
  clauses: RuleClause[];
  provenance: string;
}

export interface RulesApplied {
  fired: number[];
  prediction: number;
}
