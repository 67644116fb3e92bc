import { beforeEach, describe, expect, it } from 'vitest';

import { renderBadge, renderEvidence, renderHighlights, showBanner, hideBanner } from '../src/render.js';
import type { Match } from '../src/types.js';

const MATCHES: Match[] = [
  { start: 0, end: 6, text: 'Wechat', entity_id: 'E1', score: 0.9, rank: 1 },
  { start: 15, end: 21, text: 'WeChat', entity_id: 'E1', score: 0.8, rank: 2 },
];

describe('renderHighlights', () => {
  let container: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = '<div id="c"></div>';
    container = document.getElementById('c') as HTMLElement;
  });

  it('reproduces the document text and annotates marks', () => {
    const text = 'Wechat pay via WeChat!';
    renderHighlights(container, text, MATCHES, () => {});
    expect(container.textContent).toBe(text);
    const marks = container.querySelectorAll('mark.hl');
    expect(marks).toHaveLength(2);
    expect((marks[0] as HTMLElement).dataset).toMatchObject({
      start: '0',
      end: '6',
      entityId: 'E1',
      rank: '1',
    });
  });

  it('click reports the match index within the response list', () => {
    const clicks: number[] = [];
    renderHighlights(container, 'Wechat pay via WeChat!', MATCHES, (i) => clicks.push(i));
    const marks = container.querySelectorAll('mark.hl');
    (marks[1] as HTMLElement).click();
    expect(clicks).toEqual([1]);
  });
});

describe('renderEvidence', () => {
  let panel: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = '<aside id="p"></aside>';
    panel = document.getElementById('p') as HTMLElement;
  });

  it('prompts until a match is selected', () => {
    renderEvidence(panel, null, null);
    expect(panel.querySelector('.evidence-hint')).not.toBeNull();
  });

  it('renders title and description', () => {
    renderEvidence(panel, MATCHES[0], {
      entity_id: 'E1',
      title: 'WeChat',
      description: 'A platform.',
    });
    expect(panel.querySelector('.evidence-title')?.textContent).toBe('WeChat');
    expect(panel.querySelector('.evidence-body')?.textContent).toBe('A platform.');
  });

  it('falls back to the entity id and a placeholder', () => {
    renderEvidence(panel, MATCHES[0], null);
    expect(panel.querySelector('.evidence-title')?.textContent).toBe('E1');
    expect(panel.querySelector('.evidence-body')?.textContent).toBe(
      'No external knowledge for this entity.',
    );
  });
});

describe('banner', () => {
  it('shows, fires its action, and hides', () => {
    document.body.innerHTML = '<div id="b" class="banner"></div>';
    const banner = document.getElementById('b') as HTMLElement;
    let fired = 0;
    showBanner(banner, 'problem', 'Retry', () => fired++);
    expect(banner.classList.contains('visible')).toBe(true);
    (banner.querySelector('button') as HTMLButtonElement).click();
    expect(fired).toBe(1);
    expect(banner.classList.contains('visible')).toBe(false);
    showBanner(banner, 'again');
    hideBanner(banner);
    expect(banner.textContent).toBe('');
  });
});
