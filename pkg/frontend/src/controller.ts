/**
 * Annotation session state machine, independent of the DOM.
 *
 * Submits are optimistic with rollback: the UI locks while a judgment is in
 * flight, progress only advances on an acknowledged submit, and a rejected
 * or failed submit re-enables the current task so no judgment is lost.
 */

import {
  Choice,
  ConnectionError,
  DuplicateJudgmentError,
  PrefApi,
  Progress,
  TaskView,
  UnknownTaskError,
} from './api.js';

export interface View {
  showTask(task: TaskView): void;
  showDone(progress: Progress): void;
  showInlineError(message: string): void;
  showConnectionBanner(message: string): void;
  clearBanners(): void;
  setProgress(progress: Progress): void;
  setSubmitEnabled(enabled: boolean): void;
}

export type ControllerState = 'idle' | 'loading' | 'showing' | 'submitting' | 'done';

const KEY_TO_CHOICE: Record<string, Choice> = { '1': 'A', '2': 'B', '0': 'tie' };

export class AnnotationController {
  state: ControllerState = 'idle';
  current: TaskView | null = null;

  constructor(
    private readonly api: Pick<PrefApi, 'nextTask' | 'submit'>,
    private readonly view: View,
  ) {}

  async start(): Promise<void> {
    await this.fetchNext();
  }

  /** Retry entry point for the connection banner. */
  async retry(): Promise<void> {
    if (this.state === 'showing' || this.state === 'done') {
      return;
    }
    await this.fetchNext();
  }

  private async fetchNext(): Promise<void> {
    this.state = 'loading';
    this.view.setSubmitEnabled(false);
    try {
      const result = await this.api.nextTask();
      this.view.clearBanners();
      if (result.kind === 'done') {
        this.state = 'done';
        this.current = null;
        this.view.setProgress(result.progress);
        this.view.showDone(result.progress);
        return;
      }
      this.current = result.task;
      this.state = 'showing';
      this.view.setProgress(result.task.progress);
      this.view.showTask(result.task);
      // Submit stays disabled until the annotator makes a choice; choosing
      // is what triggers the single enabled submit.
      this.view.setSubmitEnabled(true);
    } catch (err) {
      this.state = 'idle';
      this.view.showConnectionBanner(err instanceof Error ? err.message : String(err));
    }
  }

  async choose(choice: Choice): Promise<void> {
    if (this.state !== 'showing' || this.current === null) {
      return; // double submits and stray keys are ignored
    }
    const task = this.current;
    this.state = 'submitting';
    this.view.setSubmitEnabled(false);
    try {
      const progress = await this.api.submit(task.pair_id, choice);
      this.view.setProgress(progress);
      await this.fetchNext();
    } catch (err) {
      if (err instanceof DuplicateJudgmentError || err instanceof UnknownTaskError) {
        // Rollback: the optimistic submit was rejected outright.
        this.state = 'showing';
        this.view.showInlineError(err.message);
        this.view.setSubmitEnabled(true);
        return;
      }
      if (err instanceof ConnectionError) {
        // The judgment is not lost: the same task stays active for retry.
        this.state = 'showing';
        this.view.showConnectionBanner(err.message);
        this.view.setSubmitEnabled(true);
        return;
      }
      this.state = 'showing';
      this.view.showInlineError(err instanceof Error ? err.message : String(err));
      this.view.setSubmitEnabled(true);
    }
  }

  /** Keyboard shortcuts: 1 -> A, 2 -> B, 0 -> tie. */
  handleKey(key: string): void {
    const choice = KEY_TO_CHOICE[key];
    if (choice !== undefined) {
      void this.choose(choice);
    }
  }
}
