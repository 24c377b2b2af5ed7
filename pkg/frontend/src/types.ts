// Shapes of the service JSON payloads the console consumes and produces.
// Weights map arm id to its share of traffic for the epoch; stats pair up
// as [successes, failures].

export interface PosteriorSummary {
  alpha: number;
  beta: number;
  mean: number;
  ci95: [number, number];
}

export interface EpochEntry {
  epoch: number;
  weights: Record<string, number>;
  floor: number | null;
  stats: Record<string, [number, number]>;
  posteriors: Record<string, PosteriorSummary>;
}

export interface AdminEvent {
  type: "add_arm" | "blacklist" | "floor_schedule";
  effective_epoch: number;
  arm?: string;
  on?: boolean;
  schedule?: FloorScheduleBody;
}

export interface HistoryResponse {
  campaign_id: string;
  epoch: number;
  blacklist: string[];
  epochs: EpochEntry[];
  admin: AdminEvent[];
}

export interface AllocationResponse {
  epoch: number;
  weights: Record<string, number>;
  cumulative: [string, number][];
}

export interface BatchResponse extends AllocationResponse {
  changed: boolean;
}

export interface CampaignSummary {
  campaign_id: string;
  epoch: number;
  arms: string[];
  blacklist: string[];
}

export interface CampaignListResponse {
  campaigns: CampaignSummary[];
}

export interface FloorScheduleBody {
  default: number;
  entries: [number, number][];
}

export interface BlacklistResponse {
  arm: string;
  blacklisted: boolean;
  effective_epoch: number;
}

export interface AddArmResponse {
  arm: string;
  effective_epoch: number;
}

export interface FloorScheduleResponse extends FloorScheduleBody {
  effective_epoch: number;
}

export interface ErrorBody {
  error: {
    code: string;
    message: string;
  };
}

// One arm's weight trajectory across epochs, ready for charting.
export interface ArmSeries {
  arm: string;
  points: { epoch: number; weight: number }[];
  blacklisted: boolean;
  finalWeight: number;
}

// Everything a campaign screen renders, derived purely from the history
// and allocation endpoints.
export interface CampaignView {
  campaignId: string;
  epoch: number;
  blacklist: string[];
  series: ArmSeries[];
  posteriors: Record<string, PosteriorSummary>;
  allocation: AllocationResponse;
  pendingAdmin: AdminEvent[];
}
