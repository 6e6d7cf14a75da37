/** Coordinator dashboard: read-only aggregation of the report endpoints. */

import { ApiClient, ApiError } from "./api.js";
import type { FeatureMeans, HumanRankReport, IaaReport, ProgressReport } from "./types.js";

export interface DashboardData {
  progress: ProgressReport;
  iaa: IaaReport | null;
  rank: HumanRankReport | null;
  featureMeans: FeatureMeans;
}

/** Fetch everything the dashboard shows; reports that are not ready yet
 * (409 while annotation is still running) come back as null. */
export async function loadDashboard(api: ApiClient): Promise<DashboardData> {
  const progress = await api.progress();
  let iaa: IaaReport | null = null;
  let rank: HumanRankReport | null = null;
  try {
    iaa = await api.iaaReport();
  } catch (error) {
    if (!(error instanceof ApiError && error.status === 409)) throw error;
  }
  try {
    rank = await api.humanRank(true);
  } catch (error) {
    if (!(error instanceof ApiError && error.status === 409)) throw error;
  }
  const featureMeans = await api.featureMeans();
  return { progress, iaa, rank, featureMeans };
}
