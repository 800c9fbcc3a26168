/** Direction detection so right-to-left source texts render correctly. */

const RTL_RANGES = [
  [0x0590, 0x08ff], // Hebrew, Arabic, Syriac, Thaana, and neighbors
  [0xfb1d, 0xfdff],
  [0xfe70, 0xfeff],
];

const STRONG_LTR = /[A-Za-zÀ-ɏͰ-֏Ѐ-ӿ]/;

export function isRtlText(text: string): boolean {
  for (const ch of text) {
    const code = ch.codePointAt(0) ?? 0;
    for (const range of RTL_RANGES) {
      const lo = range[0] ?? 0;
      const hi = range[1] ?? 0;
      if (code >= lo && code <= hi) {
        return true;
      }
    }
    if (STRONG_LTR.test(ch)) {
      return false;
    }
  }
  return false;
}

export function directionFor(text: string): 'rtl' | 'ltr' {
  return isRtlText(text) ? 'rtl' : 'ltr';
}
