import { describe, expect, it } from 'vitest';

import {
  Choice,
  ConnectionError,
  DuplicateJudgmentError,
  NextResult,
  Progress,
  TaskView,
} from '../src/api.js';
import { AnnotationController, View } from '../src/controller.js';

function task(id: string, done: number, total: number): TaskView {
  return {
    pair_id: id,
    source_text: `source ${id}`,
    candidate_a: `a ${id}`,
    candidate_b: `b ${id}`,
    progress: { done, total },
  };
}

class FakeView implements View {
  events: string[] = [];
  submitEnabled = false;
  progress: Progress = { done: 0, total: 0 };

  showTask(t: TaskView): void {
    this.events.push(`task:${t.pair_id}`);
  }
  showDone(p: Progress): void {
    this.events.push(`done:${p.done}/${p.total}`);
  }
  showInlineError(message: string): void {
    this.events.push(`error:${message}`);
  }
  showConnectionBanner(message: string): void {
    this.events.push('banner');
  }
  clearBanners(): void {
    this.events.push('clear-banner');
  }
  setProgress(p: Progress): void {
    this.progress = p;
  }
  setSubmitEnabled(enabled: boolean): void {
    this.submitEnabled = enabled;
  }
}

type SubmitResult = Progress | Error;

class FakeApi {
  submissions: Array<{ pairId: string; choice: Choice }> = [];
  private nextResults: NextResult[];
  private submitResults: SubmitResult[];
  submitDelay: Promise<void> | null = null;

  constructor(nextResults: NextResult[], submitResults: SubmitResult[] = []) {
    this.nextResults = [...nextResults];
    this.submitResults = [...submitResults];
  }

  async nextTask(): Promise<NextResult> {
    const result = this.nextResults.shift();
    if (!result) throw new ConnectionError('no scripted next result');
    if (result instanceof Error) throw result;
    return result;
  }

  async submit(pairId: string, choice: Choice): Promise<Progress> {
    if (this.submitDelay) await this.submitDelay;
    this.submissions.push({ pairId, choice });
    const result = this.submitResults.shift();
    if (!result) return { done: this.submissions.length, total: 20 };
    if (result instanceof Error) throw result;
    return result;
  }
}

describe('AnnotationController happy path', () => {
  it('renders the first task with submit enabled after fetch', async () => {
    const api = new FakeApi([{ kind: 'task', task: task('p1', 0, 2) }]);
    const view = new FakeView();
    const controller = new AnnotationController(api, view);
    await controller.start();
    expect(view.events).toContain('task:p1');
    expect(view.submitEnabled).toBe(true);
    expect(controller.state).toBe('showing');
  });

  it('submits, advances progress on ack only, and auto-fetches the next task', async () => {
    const api = new FakeApi(
      [
        { kind: 'task', task: task('p1', 0, 2) },
        { kind: 'task', task: task('p2', 1, 2) },
      ],
      [{ done: 1, total: 2 }],
    );
    const view = new FakeView();
    const controller = new AnnotationController(api, view);
    await controller.start();
    await controller.choose('A');
    expect(api.submissions).toEqual([{ pairId: 'p1', choice: 'A' }]);
    expect(view.progress).toEqual({ done: 1, total: 2 });
    expect(view.events.filter((e) => e.startsWith('task:'))).toEqual(['task:p1', 'task:p2']);
  });

  it('shows the done screen when the session is complete', async () => {
    const api = new FakeApi([
      { kind: 'task', task: task('p1', 1, 2) },
      { kind: 'done', progress: { done: 2, total: 2 } },
    ]);
    const view = new FakeView();
    const controller = new AnnotationController(api, view);
    await controller.start();
    await controller.choose('tie');
    expect(view.events.at(-1)).toBe('done:2/2');
    expect(controller.state).toBe('done');
  });
});

describe('double submission guard', () => {
  it('a rapid double invocation produces exactly one POST', async () => {
    const api = new FakeApi(
      [
        { kind: 'task', task: task('p1', 0, 2) },
        { kind: 'task', task: task('p2', 1, 2) },
      ],
      [{ done: 1, total: 2 }],
    );
    let release: () => void = () => {};
    api.submitDelay = new Promise((resolve) => {
      release = resolve;
    });
    const view = new FakeView();
    const controller = new AnnotationController(api, view);
    await controller.start();

    const first = controller.choose('A');
    const second = controller.choose('A'); // double click while in flight
    release();
    await Promise.all([first, second]);
    expect(api.submissions).toHaveLength(1);
  });

  it('keyboard shortcuts map 1/2/0 and respect the same guard', async () => {
    const api = new FakeApi(
      [
        { kind: 'task', task: task('p1', 0, 3) },
        { kind: 'task', task: task('p2', 1, 3) },
        { kind: 'task', task: task('p3', 2, 3) },
      ],
      [
        { done: 1, total: 3 },
        { done: 2, total: 3 },
      ],
    );
    const view = new FakeView();
    const controller = new AnnotationController(api, view);
    await controller.start();
    controller.handleKey('0');
    await new Promise((resolve) => setTimeout(resolve, 0));
    controller.handleKey('2');
    await new Promise((resolve) => setTimeout(resolve, 0));
    controller.handleKey('x'); // not a shortcut
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(api.submissions.map((s) => s.choice)).toEqual(['tie', 'B']);
  });
});

describe('failure handling', () => {
  it('rolls back on DuplicateJudgmentError and re-enables input', async () => {
    const api = new FakeApi(
      [{ kind: 'task', task: task('p1', 0, 2) }],
      [new DuplicateJudgmentError('already judged', 409)],
    );
    const view = new FakeView();
    const controller = new AnnotationController(api, view);
    await controller.start();
    await controller.choose('B');
    expect(view.events).toContain('error:already judged');
    expect(view.submitEnabled).toBe(true);
    expect(controller.state).toBe('showing');
    expect(view.progress).toEqual({ done: 0, total: 2 }); // no phantom progress
  });

  it('keeps the task on connection failure so no judgment is lost', async () => {
    const api = new FakeApi([{ kind: 'task', task: task('p1', 0, 2) }], [new ConnectionError('offline')]);
    const view = new FakeView();
    const controller = new AnnotationController(api, view);
    await controller.start();
    await controller.choose('A');
    expect(view.events).toContain('banner');
    expect(controller.current?.pair_id).toBe('p1');
    expect(view.submitEnabled).toBe(true);

    // The retry path resubmits the same task successfully.
    await controller.choose('A');
    expect(api.submissions.map((s) => s.pairId)).toEqual(['p1', 'p1']);
  });

  it('shows the connection banner when the first fetch fails, then recovers via retry', async () => {
    const api = new FakeApi([{ kind: 'task', task: task('p1', 0, 2) }]);
    const failingOnce = {
      calls: 0,
      async nextTask(): Promise<NextResult> {
        this.calls += 1;
        if (this.calls === 1) throw new ConnectionError('backend down');
        return api.nextTask();
      },
      submit: api.submit.bind(api),
    };
    const view = new FakeView();
    const controller = new AnnotationController(failingOnce, view);
    await controller.start();
    expect(view.events).toContain('banner');
    await controller.retry();
    expect(view.events).toContain('task:p1');
  });
});

describe('payload hygiene', () => {
  it('the controller never sees anything beyond the whitelisted task fields', async () => {
    const api = new FakeApi([{ kind: 'task', task: task('p1', 0, 1) }]);
    const view = new FakeView();
    const controller = new AnnotationController(api, view);
    await controller.start();
    expect(Object.keys(controller.current ?? {}).sort()).toEqual([
      'candidate_a',
      'candidate_b',
      'pair_id',
      'progress',
      'source_text',
    ]);
  });
});
