import { badgeText, computeSegments, rankClass } from './highlight.js';
import type { EntityInfo, Match } from './types.js';

/**
 * Render the document with inline highlights. Offsets are applied against the
 * exact text that was indexed; scores and ranks come straight from the
 * service and are never recomputed here.
 */
export function renderHighlights(
  container: HTMLElement,
  text: string,
  matches: Match[],
  onSelect: (index: number) => void,
): void {
  container.textContent = '';
  for (const segment of computeSegments(text, matches)) {
    if (!segment.match) {
      container.appendChild(document.createTextNode(segment.text));
      continue;
    }
    const match = segment.match;
    const span = document.createElement('mark');
    span.className = `hl ${rankClass(match.rank)}`;
    span.textContent = segment.text;
    span.dataset.start = String(match.start);
    span.dataset.end = String(match.end);
    span.dataset.entityId = match.entity_id;
    span.dataset.rank = String(match.rank);
    span.title = `#${match.rank} ${match.entity_id} (score ${match.score.toFixed(4)})`;
    span.addEventListener('click', () => onSelect(matches.indexOf(match)));
    container.appendChild(span);
  }
}

export function renderBadge(element: HTMLElement, matches: Match[]): void {
  element.textContent = badgeText(matches);
}

export function renderEvidence(
  panel: HTMLElement,
  selected: Match | null,
  info: EntityInfo | null,
): void {
  panel.textContent = '';
  if (!selected) {
    const hint = document.createElement('p');
    hint.className = 'evidence-hint';
    hint.textContent = 'Select a highlighted match to see its external knowledge.';
    panel.appendChild(hint);
    return;
  }
  const title = document.createElement('h3');
  title.className = 'evidence-title';
  title.textContent = info?.title || selected.entity_id;
  panel.appendChild(title);
  const body = document.createElement('p');
  body.className = 'evidence-body';
  if (info && info.description) {
    body.textContent = info.description;
  } else {
    body.classList.add('evidence-empty');
    body.textContent = 'No external knowledge for this entity.';
  }
  panel.appendChild(body);
}

export function showBanner(
  element: HTMLElement,
  message: string,
  actionLabel?: string,
  onAction?: () => void,
): void {
  element.textContent = '';
  element.classList.add('visible');
  const text = document.createElement('span');
  text.textContent = message;
  element.appendChild(text);
  if (actionLabel && onAction) {
    const button = document.createElement('button');
    button.textContent = actionLabel;
    button.addEventListener('click', () => {
      hideBanner(element);
      onAction();
    });
    element.appendChild(button);
  }
}

export function hideBanner(element: HTMLElement): void {
  element.textContent = '';
  element.classList.remove('visible');
}
