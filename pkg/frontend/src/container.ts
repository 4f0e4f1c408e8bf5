/**
 * Binary tensor container shared with the core CLI.
 *
 * Layout (little-endian): magic "RKTN", u8 version (1), u8 dtype tag
 * (0 = float32, 1 = uint8), u8 rank, rank x u32 dims, C-order payload.
 */

const MAGIC = "RKTN";
const VERSION = 1;
const HEADER_FIXED = 7; // magic + version + dtype + rank

export type DType = "float32" | "uint8";

export interface Tensor {
  dtype: DType;
  shape: number[];
  data: Float32Array | Uint8Array;
}

const DTYPE_TAGS: Record<DType, number> = { float32: 0, uint8: 1 };

function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function encodeTensor(tensor: Tensor): Buffer {
  const { dtype, shape, data } = tensor;
  if (elementCount(shape) !== data.length) {
    throw new Error(`shape ${JSON.stringify(shape)} does not match ${data.length} elements`);
  }
  const itemSize = dtype === "float32" ? 4 : 1;
  const buf = Buffer.alloc(HEADER_FIXED + 4 * shape.length + itemSize * data.length);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt8(VERSION, 4);
  buf.writeUInt8(DTYPE_TAGS[dtype], 5);
  buf.writeUInt8(shape.length, 6);
  shape.forEach((dim, i) => buf.writeUInt32LE(dim, HEADER_FIXED + 4 * i));
  const payload = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  payload.copy(buf, HEADER_FIXED + 4 * shape.length);
  return buf;
}

export function decodeTensor(buf: Buffer): Tensor {
  if (buf.length < HEADER_FIXED || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("not a tensor container (bad magic)");
  }
  const version = buf.readUInt8(4);
  if (version !== VERSION) {
    throw new Error(`unsupported container version ${version}`);
  }
  const tag = buf.readUInt8(5);
  const rank = buf.readUInt8(6);
  const shape: number[] = [];
  for (let i = 0; i < rank; i++) {
    shape.push(buf.readUInt32LE(HEADER_FIXED + 4 * i));
  }
  const offset = HEADER_FIXED + 4 * rank;
  const count = elementCount(shape);
  const itemSize = tag === 0 ? 4 : 1;
  if (buf.length !== offset + count * itemSize) {
    throw new Error(`payload size mismatch (${buf.length} vs ${offset + count * itemSize})`);
  }
  // slice to guarantee alignment for the typed-array view
  const payload = Uint8Array.prototype.slice.call(buf, offset);
  if (tag === 0) {
    return { dtype: "float32", shape, data: new Float32Array(payload.buffer) };
  }
  if (tag === 1) {
    return { dtype: "uint8", shape, data: new Uint8Array(payload.buffer) };
  }
  throw new Error(`unknown dtype tag ${tag}`);
}
