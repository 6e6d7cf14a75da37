/** Payload shapes of the annotation-service JSON API. */

export type Choice = "A" | "B" | "Tie";

export interface TaskProgress {
  assigned: number;
  answered: number;
  remaining: number;
}

export interface TaskPayload {
  done: boolean;
  task: {
    tournament_id: string;
    hs_text: string;
    cn_a: string;
    cn_b: string;
    guidelines_version: string;
  } | null;
  progress: TaskProgress;
}

export interface FeatureTaskPayload {
  done: boolean;
  task: {
    task_id: string;
    hs_text: string;
    cn_text: string;
    scales: Record<string, [number, number]>;
    guidelines_version: string;
  } | null;
  progress: { assigned: number; answered: number };
}

export interface FeatureForm {
  relatedness: number | null;
  specificity: number | null;
  richness: number | null;
  coherence: number | null;
  grammaticality: number | null;
  overall: number | null;
}

export interface ProgressReport {
  tournaments: number;
  shared: number;
  annotators: Record<string, { assigned: number; answered: number }>;
  feature_ratings: number;
}

export interface KappaPair {
  annotator_a: string;
  annotator_b: string;
  kappa: number | null;
  n_items: number;
  undefined?: string;
}

export type IaaReport = Record<
  string,
  { pairs: KappaPair[]; mean_kappa: number | null }
>;

export interface RankRow {
  rank: number;
  system_id: string;
  score: number;
}

export interface HumanRankReport {
  scoreboard: {
    points: Record<string, number>;
    total_tournaments: number;
    normalized_share: Record<string, number>;
  };
  ranking: RankRow[];
}

export type FeatureMeans = Record<string, Record<string, number>>;
