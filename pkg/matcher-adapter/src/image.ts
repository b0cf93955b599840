import { readFileSync } from "fs";
import { PNG } from "pngjs";

/** Grayscale image with float32 intensities in [0, 1], row-major. */
export interface GrayImage {
  width: number;
  height: number;
  data: Float32Array;
}

/** Read a PNG file and convert it to grayscale via Rec. 601 luma. */
export function readGrayPng(path: string): GrayImage {
  const png = PNG.sync.read(readFileSync(path));
  const data = new Float32Array(png.width * png.height);
  for (let i = 0; i < data.length; i++) {
    const o = i * 4;
    const luma =
      0.299 * png.data[o] + 0.587 * png.data[o + 1] + 0.114 * png.data[o + 2];
    data[i] = luma / 255;
  }
  return { width: png.width, height: png.height, data };
}

/** Sample a plane bilinearly at (x, y), clamping to the image border. */
export function sampleBilinear(
  data: Float32Array,
  width: number,
  height: number,
  x: number,
  y: number,
): number {
  const cx = Math.min(Math.max(x, 0), width - 1);
  const cy = Math.min(Math.max(y, 0), height - 1);
  const x0 = Math.min(Math.floor(cx), width - 2 < 0 ? 0 : width - 2);
  const y0 = Math.min(Math.floor(cy), height - 2 < 0 ? 0 : height - 2);
  const x1 = Math.min(x0 + 1, width - 1);
  const y1 = Math.min(y0 + 1, height - 1);
  const fx = cx - x0;
  const fy = cy - y0;
  const top = data[y0 * width + x0] * (1 - fx) + data[y0 * width + x1] * fx;
  const bottom = data[y1 * width + x0] * (1 - fx) + data[y1 * width + x1] * fx;
  return top * (1 - fy) + bottom * fy;
}

/**
 * Resize with bilinear interpolation using the half-pixel-center
 * convention: output pixel (x, y) samples the source at
 * ((x + 0.5) * width / outWidth - 0.5, ...).
 */
export function resizeBilinear(
  img: GrayImage,
  outWidth: number,
  outHeight: number,
): GrayImage {
  if (img.width === outWidth && img.height === outHeight) {
    return img;
  }
  const data = new Float32Array(outWidth * outHeight);
  const scaleX = img.width / outWidth;
  const scaleY = img.height / outHeight;
  for (let y = 0; y < outHeight; y++) {
    const srcY = (y + 0.5) * scaleY - 0.5;
    for (let x = 0; x < outWidth; x++) {
      const srcX = (x + 0.5) * scaleX - 0.5;
      data[y * outWidth + x] = sampleBilinear(
        img.data,
        img.width,
        img.height,
        srcX,
        srcY,
      );
    }
  }
  return { width: outWidth, height: outHeight, data };
}
