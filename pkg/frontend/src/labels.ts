// The three check-worthiness labels in their canonical order. The 1/2/3
// numbering matches the annotation guidelines, so keyboard shortcuts line up
// with what annotators read in the side panel.

export const CW_LABELS = [
  'Non-Factual',
  'Unimportant Factual',
  'Check-worthy Factual',
] as const;

export type CwLabel = (typeof CW_LABELS)[number];

export const LABEL_DEFINITIONS: Record<CwLabel, string> = {
  'Non-Factual':
    'Subjective text such as opinions, beliefs, declarations, or wishes. ' +
    'Many questions also fall into this category. These sentences do not ' +
    'contain any factual claim.',
  'Unimportant Factual':
    'Text that contain factual claims but are not important for ' +
    'fact-checking. The general public would not be interested in verifying them.',
  'Check-worthy Factual':
    'Text that contain factual claims of public interest. These are the ' +
    'kinds of claims journalists would fact-check.',
};

/** Maps a keyboard key to a label; "1"/"2"/"3" follow the canonical order. */
export function labelForKey(key: string): CwLabel | null {
  const index = Number.parseInt(key, 10) - 1;
  if (Number.isInteger(index) && index >= 0 && index < CW_LABELS.length) {
    return CW_LABELS[index];
  }
  return null;
}
