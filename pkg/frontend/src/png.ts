/**
 * Tiny PNG writer (8-bit RGB, no interlacing) plus the colormap used for
 * field heatmaps. Heatmaps are exact pixel grids, so no rasterizer is
 * needed: one matrix cell becomes one (scaled) pixel block.
 */

import { deflateSync } from "node:zlib";

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Uint8Array): number {
  let c = 0xffffffff;
  for (const byte of buf) {
    c = CRC_TABLE[(c ^ byte) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Uint8Array): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(data.length, 0);
  head.write(type, 4, "ascii");
  const crcInput = Buffer.concat([Buffer.from(type, "ascii"), Buffer.from(data)]);
  const tail = Buffer.alloc(4);
  tail.writeUInt32BE(crc32(crcInput), 0);
  return Buffer.concat([head, Buffer.from(data), tail]);
}

/** rgb: row-major (height x width x 3). */
export function encodePng(width: number, height: number, rgb: Uint8Array): Buffer {
  if (rgb.length !== width * height * 3) {
    throw new Error(`pixel buffer is ${rgb.length} bytes, expected ${width * height * 3}`);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 2; // truecolor
  const scanlines = Buffer.alloc(height * (1 + width * 3));
  for (let y = 0; y < height; y++) {
    const off = y * (1 + width * 3);
    scanlines[off] = 0; // filter: none
    rgb.subarray(y * width * 3, (y + 1) * width * 3).forEach((v, i) => {
      scanlines[off + 1 + i] = v;
    });
  }
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(scanlines, { level: 6 })),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

// Compact viridis approximation: anchor colors interpolated linearly.
const VIRIDIS: [number, number, number][] = [
  [68, 1, 84], [71, 44, 122], [59, 81, 139], [44, 113, 142], [33, 144, 141],
  [39, 173, 129], [92, 200, 99], [170, 220, 50], [253, 231, 37],
];

export function viridis(t: number): [number, number, number] {
  const x = Math.min(1, Math.max(0, t)) * (VIRIDIS.length - 1);
  const i = Math.min(VIRIDIS.length - 2, Math.floor(x));
  const f = x - i;
  const a = VIRIDIS[i];
  const b = VIRIDIS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

export interface HeatPanel {
  /** values[i][j]: row i from top, column j from left */
  values: number[][];
  label?: string;
}

/**
 * Render panels side by side, each cell scaled to `scale` pixels, with a
 * small separator. Every panel is normalized independently.
 */
export function heatmapPng(panels: HeatPanel[], scale = 3, gap = 6): Buffer {
  if (panels.length === 0) {
    throw new Error("heatmap needs at least one panel");
  }
  const rows = panels[0].values.length;
  const cols = panels[0].values[0].length;
  for (const p of panels) {
    if (p.values.length !== rows || p.values[0].length !== cols) {
      throw new Error("heatmap panels must share their grid shape");
    }
  }
  const width = panels.length * cols * scale + (panels.length - 1) * gap;
  const height = rows * scale;
  const rgb = new Uint8Array(width * height * 3).fill(255);
  panels.forEach((panel, p) => {
    let lo = Infinity;
    let hi = -Infinity;
    for (const row of panel.values) {
      for (const v of row) {
        if (Number.isFinite(v)) {
          lo = Math.min(lo, v);
          hi = Math.max(hi, v);
        }
      }
    }
    const span = hi > lo ? hi - lo : 1;
    const x0 = p * (cols * scale + gap);
    for (let i = 0; i < rows; i++) {
      for (let j = 0; j < cols; j++) {
        const [r, g, b] = viridis((panel.values[i][j] - lo) / span);
        for (let dy = 0; dy < scale; dy++) {
          for (let dx = 0; dx < scale; dx++) {
            const off = ((i * scale + dy) * width + x0 + j * scale + dx) * 3;
            rgb[off] = r;
            rgb[off + 1] = g;
            rgb[off + 2] = b;
          }
        }
      }
    }
  });
  return encodePng(width, height, rgb);
}
