/** Minimal binary PGM (P5) / PPM (P6) decoder so the browser can preview
 * the service's photo blobs on a canvas. */

export interface DecodedImage {
  width: number;
  height: number;
  rgba: Uint8ClampedArray<ArrayBuffer>;
}

export function decodePnm(data: ArrayBuffer): DecodedImage {
  const bytes = new Uint8Array(data);
  const magic = String.fromCharCode(bytes[0] ?? 0, bytes[1] ?? 0);
  if (magic !== "P5" && magic !== "P6") {
    throw new Error(`unsupported image magic ${magic}`);
  }
  const channels = magic === "P5" ? 1 : 3;

  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    let start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    if (start === pos) throw new Error("truncated header");
    fields.push(Number(ascii(bytes, start, pos)));
  }
  pos++; // the single whitespace byte after maxval
  const [width, height, maxval] = fields;
  if (!Number.isFinite(width) || !Number.isFinite(height) || maxval !== 255) {
    throw new Error("bad header fields");
  }
  const expected = width * height * channels;
  if (bytes.length - pos < expected) throw new Error("truncated payload");

  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    const src = pos + i * channels;
    rgba[i * 4] = bytes[src];
    rgba[i * 4 + 1] = bytes[src + (channels === 3 ? 1 : 0)];
    rgba[i * 4 + 2] = bytes[src + (channels === 3 ? 2 : 0)];
    rgba[i * 4 + 3] = 255;
  }
  return { width, height, rgba };
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

function ascii(bytes: Uint8Array, start: number, end: number): string {
  let out = "";
  for (let i = start; i < end; i++) out += String.fromCharCode(bytes[i]);
  return out;
}
