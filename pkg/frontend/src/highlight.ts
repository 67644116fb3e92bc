import type { Match } from './types.js';

/** A slice of the document: plain text, or a highlighted match. */
export interface Segment {
  text: string;
  match?: Match;
}

/**
 * Partition the document into plain and highlighted segments.
 *
 * Ranges are validated against the text bounds and must come from the
 * service untouched. Overlapping ranges (which a well-behaved service never
 * sends) are merged by keeping the earlier, better-ranked match.
 */
export function computeSegments(text: string, matches: Match[]): Segment[] {
  for (const match of matches) {
    if (match.start < 0 || match.end > text.length || match.start >= match.end) {
      throw new RangeError(
        `match [${match.start},${match.end}) outside document of length ${text.length}`,
      );
    }
  }
  const ordered = [...matches].sort(
    (a, b) => a.start - b.start || a.end - b.end || a.rank - b.rank,
  );
  const kept: Match[] = [];
  for (const match of ordered) {
    const last = kept[kept.length - 1];
    if (last && match.start < last.end) continue;
    kept.push(match);
  }
  const segments: Segment[] = [];
  let cursor = 0;
  for (const match of kept) {
    if (match.start > cursor) {
      segments.push({ text: text.slice(cursor, match.start) });
    }
    segments.push({ text: text.slice(match.start, match.end), match });
    cursor = match.end;
  }
  if (cursor < text.length) {
    segments.push({ text: text.slice(cursor) });
  }
  return segments;
}

/** CSS class for rank-colored emphasis; ranks beyond 3 share one tier. */
export function rankClass(rank: number): string {
  return rank <= 3 ? `rank-${rank}` : 'rank-n';
}

export function countEntities(matches: Match[]): number {
  return new Set(matches.map((m) => m.entity_id)).size;
}

export function badgeText(matches: Match[]): string {
  const n = matches.length;
  const m = countEntities(matches);
  return `${n} ${n === 1 ? 'match' : 'matches'}, ${m} ${m === 1 ? 'entity' : 'entities'}`;
}
