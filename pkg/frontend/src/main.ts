/**
 * Entry point: wires query parameters to the API client, the DOM view, and
 * the controller. Usage:
 *
 *   index.html?base=http://127.0.0.1:8765&session=<id>&annotator=<name>
 */

import { Choice, PrefApi } from './api.js';
import { AnnotationController } from './controller.js';
import { DomView } from './dom.js';

function requireParam(params: URLSearchParams, name: string): string {
  const value = params.get(name);
  if (!value) {
    throw new Error(`missing ?${name}= query parameter`);
  }
  return value;
}

export function boot(doc: Document, location: Location): AnnotationController {
  const params = new URLSearchParams(location.search);
  const api = new PrefApi(
    requireParam(params, 'base'),
    requireParam(params, 'session'),
    requireParam(params, 'annotator'),
  );
  const view = new DomView(doc);
  const controller = new AnnotationController(api, view);

  for (const button of view.buttons) {
    button.addEventListener('click', () => {
      const choice = button.dataset.choice as Choice;
      void controller.choose(choice);
    });
  }
  const retry = doc.getElementById('retry-button');
  retry?.addEventListener('click', () => void controller.retry());
  doc.addEventListener('keydown', (event) => controller.handleKey(event.key));

  void controller.start();
  return controller;
}

if (typeof document !== 'undefined' && typeof window !== 'undefined') {
  try {
    boot(document, window.location);
  } catch (err) {
    const banner = document.getElementById('connection-banner');
    if (banner) {
      banner.hidden = false;
      banner.textContent = String(err);
    }
  }
}
