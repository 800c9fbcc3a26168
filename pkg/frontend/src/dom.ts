/**
 * DOM-backed view. Both candidates render with identical styling; the only
 * visual distinction is the neutral A/B label. Source text direction follows
 * its script, so Hebrew sources read right to left.
 */

import { Progress, TaskView } from './api.js';
import { View } from './controller.js';
import { directionFor } from './rtl.js';

export class DomView implements View {
  private readonly source: HTMLElement;
  private readonly candidateA: HTMLElement;
  private readonly candidateB: HTMLElement;
  private readonly progressLabel: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly inlineError: HTMLElement;
  private readonly taskPanel: HTMLElement;
  private readonly donePanel: HTMLElement;
  readonly buttons: HTMLButtonElement[];

  constructor(private readonly root: Document) {
    this.source = this.require('source-text');
    this.candidateA = this.require('candidate-a');
    this.candidateB = this.require('candidate-b');
    this.progressLabel = this.require('progress');
    this.banner = this.require('connection-banner');
    this.inlineError = this.require('inline-error');
    this.taskPanel = this.require('task-panel');
    this.donePanel = this.require('done-panel');
    this.buttons = Array.from(this.root.querySelectorAll<HTMLButtonElement>('button[data-choice]'));
  }

  private require(id: string): HTMLElement {
    const node = this.root.getElementById(id);
    if (!node) {
      throw new Error(`missing #${id} in the page skeleton`);
    }
    return node;
  }

  showTask(task: TaskView): void {
    this.taskPanel.hidden = false;
    this.donePanel.hidden = true;
    this.inlineError.textContent = '';
    this.source.textContent = task.source_text;
    this.source.dir = directionFor(task.source_text);
    this.candidateA.textContent = task.candidate_a;
    this.candidateA.dir = directionFor(task.candidate_a);
    this.candidateB.textContent = task.candidate_b;
    this.candidateB.dir = directionFor(task.candidate_b);
  }

  showDone(progress: Progress): void {
    this.taskPanel.hidden = true;
    this.donePanel.hidden = false;
    this.donePanel.textContent = `All done — ${progress.done} of ${progress.total} judgments submitted. Thank you!`;
  }

  showInlineError(message: string): void {
    this.inlineError.textContent = message;
  }

  showConnectionBanner(message: string): void {
    this.banner.hidden = false;
    this.banner.textContent = `Connection problem: ${message} — retrying may help.`;
  }

  clearBanners(): void {
    this.banner.hidden = true;
    this.banner.textContent = '';
  }

  setProgress(progress: Progress): void {
    this.progressLabel.textContent = `${progress.done} / ${progress.total}`;
  }

  setSubmitEnabled(enabled: boolean): void {
    for (const button of this.buttons) {
      button.disabled = !enabled;
    }
  }
}
