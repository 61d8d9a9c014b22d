import type {
  ContourDoc,
  DownstreamPolicy,
  Level,
  SessionDoc,
} from './types.js';

export interface Selection {
  level: Level;
  index: number;
}

/**
 * Client-side mirror of one editing session.
 *
 * `doc` is always the last snapshot the service acknowledged; no code
 * path rewrites ED values locally. `previousContour` keeps the contour
 * from before the latest acknowledged change so charts can overlay the
 * what-if difference.
 */
export interface EditorState {
  doc: SessionDoc | null;
  previousContour: ContourDoc | null;
  selection: Selection | null;
  policy: DownstreamPolicy;
  pendingEdits: number;
  banner: string | null;
}

type Listener = (state: EditorState) => void;

const INITIAL: EditorState = {
  doc: null,
  previousContour: null,
  selection: null,
  policy: 'hold',
  pendingEdits: 0,
  banner: null,
};

export class EditorStore {
  private current: EditorState = INITIAL;
  private listeners: Listener[] = [];

  get state(): EditorState {
    return this.current;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private set(patch: Partial<EditorState>): void {
    this.current = { ...this.current, ...patch };
    for (const fn of this.listeners) fn(this.current);
  }

  /** Install a server-acknowledged snapshot; the only way ED data gets in. */
  acknowledge(doc: SessionDoc): void {
    const sameSession = this.current.doc?.session_id === doc.session_id;
    this.set({
      doc,
      previousContour: sameSession ? (this.current.doc?.contour ?? null) : null,
      selection: sameSession ? this.current.selection : null,
      banner: null,
    });
  }

  select(selection: Selection | null): void {
    this.set({ selection });
  }

  setPolicy(policy: DownstreamPolicy): void {
    this.set({ policy });
  }

  showBanner(message: string): void {
    this.set({ banner: message });
  }

  clearBanner(): void {
    this.set({ banner: null });
  }

  editStarted(): void {
    this.set({ pendingEdits: this.current.pendingEdits + 1 });
  }

  editSettled(): void {
    this.set({ pendingEdits: Math.max(0, this.current.pendingEdits - 1) });
  }
}
