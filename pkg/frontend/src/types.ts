// Wire types for the session service. Field names match the JSON
// payloads exactly; everything here is plain data.

export type Level = 'utterance' | 'word' | 'phoneme';

export type DownstreamPolicy = 'hold' | 'repredict';

export interface HedDoc {
  emotions: string[];
  utterance: number[];
  words: number[][];
  phones: number[][];
}

export interface ContourPhone {
  phone: string;
  pitch_log_hz: number;
  energy_log: number;
  duration_s: number;
}

export interface ContourDoc {
  hop_s: number;
  phones: ContourPhone[];
  tracks: {
    pitch_log_hz: number[];
    energy_log: number[];
  };
}

export interface SessionDoc {
  session_id: string;
  source: string;
  speaker: string;
  log_length: number;
  hed: HedDoc;
  words?: string[][];
  contour?: ContourDoc;
}

export interface EditPayload {
  level: Level;
  index: number;
  emotion: string;
  value: number;
  downstream_policy?: DownstreamPolicy;
}

export interface SweepRequest {
  template: EditPayload | EditPayload[];
  values: number[];
  scope?: 'utterance' | number;
  speaker?: string;
}

export interface SweepPoint {
  value: number;
  pitch_mean: number;
  pitch_std: number;
  energy_mean: number;
  energy_std: number;
  duration_total: number;
}

export interface SweepResponse {
  session_id: string;
  scope: 'utterance' | number;
  sweep: SweepPoint[];
}
