// Hex dump view model with byte-range highlighting, synchronized with the
// dissection tree: selecting a tree node highlights exactly its bytes here.

export const BYTES_PER_LINE = 8;

export interface ByteRange {
  offset: number;
  length: number;
}

export interface HexCell {
  index: number;
  hex: string;
  ascii: string;
  highlighted: boolean;
}

export interface HexLine {
  offsetLabel: string;
  cells: HexCell[];
}

export class HexFormatError extends Error {}

export function parseHex(payloadHex: string): Uint8Array {
  const cleaned = payloadHex.trim();
  if (cleaned.length % 2 !== 0 || /[^0-9a-fA-F]/.test(cleaned)) {
    throw new HexFormatError(`not a hex byte string: ${payloadHex.slice(0, 40)}`);
  }
  const bytes = new Uint8Array(cleaned.length / 2);
  for (let i = 0; i < bytes.length; i++) {
    bytes[i] = Number.parseInt(cleaned.slice(i * 2, i * 2 + 2), 16);
  }
  return bytes;
}

export function buildHexView(
  payloadHex: string,
  highlight: ByteRange | null,
): HexLine[] {
  const bytes = parseHex(payloadHex);
  const start = highlight ? highlight.offset : -1;
  const end = highlight ? highlight.offset + highlight.length : -1;
  const lines: HexLine[] = [];
  for (let base = 0; base < bytes.length; base += BYTES_PER_LINE) {
    const cells: HexCell[] = [];
    for (let i = base; i < Math.min(base + BYTES_PER_LINE, bytes.length); i++) {
      const byte = bytes[i]!;
      cells.push({
        index: i,
        hex: byte.toString(16).padStart(2, "0"),
        ascii: byte >= 32 && byte <= 126 ? String.fromCharCode(byte) : ".",
        highlighted: i >= start && i < end,
      });
    }
    lines.push({
      offsetLabel: base.toString(16).padStart(4, "0"),
      cells,
    });
  }
  return lines;
}
