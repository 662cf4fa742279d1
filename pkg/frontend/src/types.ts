// Wire types mirroring the summarization service's JSON API.

export type HighlightStatus = 'accept' | 'review' | 'reject';

export interface Highlight {
  highlight_id: string;
  segment_index: number;
  perspective: string;
  text: string;
  original_text: string;
  /** null stands for infinite perplexity on the wire. */
  perplexity: number | null;
  status: HighlightStatus;
  origin: 'model' | 'user_edited';
  visible: boolean;
  user_accepted: boolean;
}

export interface TranscriptTurn {
  index: number;
  speaker: { index: number; label: string };
  text: string;
}

export interface SegmentSpan {
  index: number;
  first_turn: number;
  last_turn: number;
}

export interface Session {
  session_id: string;
  transcript_id: string;
  transcript: { id: string; turns: TranscriptTurn[] };
  segments: SegmentSpan[];
  highlights: Highlight[];
  edit_log: unknown[];
  state: 'generated' | 'in_review' | 'finalized';
  version: number;
  created_at: string;
}

export type EditAction = 'accept' | 'edit' | 'discard' | 'restore';

export interface EditEventPayload {
  highlight_id: string;
  action: EditAction;
  new_text?: string;
  version: number;
}

export interface ApiErrorBody {
  code: string;
  stage: string | null;
  message: string;
}
