/**
 * Minimal PNG codec for binary masks.
 *
 * Encoding writes 8-bit grayscale with filter 0 rows inside *stored* deflate
 * blocks, so it needs no compressor, runs identically in the browser and in
 * node, and is byte-deterministic. Decoding parses any 8-bit gray/RGB(A)
 * non-interlaced PNG; the zlib inflate step is injected by the caller
 * (node:zlib in tests, a canvas path is used in the browser instead).
 */

export interface DecodedImage {
    width: number;
    height: number;
    gray: Uint8Array; // one luminance byte per pixel
}

export type Inflate = (data: Uint8Array) => Uint8Array;

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

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

function crc32(...parts: Uint8Array[]): number {
    let c = 0xffffffff;
    for (const part of parts) {
        for (let i = 0; i < part.length; i++) {
            c = CRC_TABLE[(c ^ part[i]) & 0xff] ^ (c >>> 8);
        }
    }
    return (c ^ 0xffffffff) >>> 0;
}

function adler32(data: Uint8Array): number {
    let a = 1;
    let b = 0;
    for (let i = 0; i < data.length; i++) {
        a = (a + data[i]) % 65521;
        b = (b + a) % 65521;
    }
    return ((b << 16) | a) >>> 0;
}

function u32(value: number): Uint8Array {
    return new Uint8Array([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
}

function chunk(type: string, body: Uint8Array): Uint8Array {
    const tag = new Uint8Array([...type].map((c) => c.charCodeAt(0)));
    const out = new Uint8Array(12 + body.length);
    out.set(u32(body.length), 0);
    out.set(tag, 4);
    out.set(body, 8);
    out.set(u32(crc32(tag, body)), 8 + body.length);
    return out;
}

/** zlib stream with stored (uncompressed) deflate blocks. */
function zlibStored(raw: Uint8Array): Uint8Array {
    const blocks: Uint8Array[] = [new Uint8Array([0x78, 0x01])];
    const max = 65535;
    for (let off = 0; off < raw.length || off === 0; off += max) {
        const slice = raw.subarray(off, Math.min(off + max, raw.length));
        const final = off + max >= raw.length ? 1 : 0;
        const len = slice.length;
        const head = new Uint8Array([final, len & 0xff, (len >>> 8) & 0xff, ~len & 0xff, (~len >>> 8) & 0xff]);
        blocks.push(head, slice);
        if (final) break;
    }
    blocks.push(u32(adler32(raw)));
    let total = 0;
    for (const b of blocks) total += b.length;
    const out = new Uint8Array(total);
    let pos = 0;
    for (const b of blocks) {
        out.set(b, pos);
        pos += b.length;
    }
    return out;
}

/** Encode one 8-bit grayscale image (values 0..255). */
export function encodeGrayPng(width: number, height: number, gray: Uint8Array): Uint8Array {
    if (gray.length !== width * height) {
        throw new Error("pixel buffer does not match dimensions");
    }
    const raw = new Uint8Array(height * (width + 1));
    for (let y = 0; y < height; y++) {
        raw[y * (width + 1)] = 0; // filter type 0
        raw.set(gray.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
    }
    const ihdr = new Uint8Array(13);
    ihdr.set(u32(width), 0);
    ihdr.set(u32(height), 4);
    ihdr[8] = 8; // bit depth
    ihdr[9] = 0; // grayscale
    const parts = [
        new Uint8Array(SIGNATURE),
        chunk("IHDR", ihdr),
        chunk("IDAT", zlibStored(raw)),
        chunk("IEND", new Uint8Array(0)),
    ];
    let total = 0;
    for (const p of parts) total += p.length;
    const out = new Uint8Array(total);
    let pos = 0;
    for (const p of parts) {
        out.set(p, pos);
        pos += p.length;
    }
    return out;
}

function paeth(a: number, b: number, c: number): number {
    const p = a + b - c;
    const pa = Math.abs(p - a);
    const pb = Math.abs(p - b);
    const pc = Math.abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

export function decodePng(bytes: Uint8Array, inflate: Inflate): DecodedImage {
    for (let i = 0; i < SIGNATURE.length; i++) {
        if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
    }
    let pos = 8;
    let width = 0;
    let height = 0;
    let colorType = 0;
    const idat: Uint8Array[] = [];
    while (pos < bytes.length) {
        const len = (bytes[pos] << 24) | (bytes[pos + 1] << 16) | (bytes[pos + 2] << 8) | bytes[pos + 3];
        const type = String.fromCharCode(bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]);
        const body = bytes.subarray(pos + 8, pos + 8 + len);
        if (type === "IHDR") {
            width = (body[0] << 24) | (body[1] << 16) | (body[2] << 8) | body[3];
            height = (body[4] << 24) | (body[5] << 16) | (body[6] << 8) | body[7];
            const depth = body[8];
            colorType = body[9];
            if (depth !== 8) throw new Error(`unsupported bit depth ${depth}`);
            if (![0, 2, 4, 6].includes(colorType)) throw new Error(`unsupported color type ${colorType}`);
            if (body[12] !== 0) throw new Error("interlaced PNGs are not supported");
        } else if (type === "IDAT") {
            idat.push(body);
        } else if (type === "IEND") {
            break;
        }
        pos += 12 + len;
    }
    let totalLen = 0;
    for (const part of idat) totalLen += part.length;
    const compressed = new Uint8Array(totalLen);
    let off = 0;
    for (const part of idat) {
        compressed.set(part, off);
        off += part.length;
    }
    const raw = inflate(compressed);
    const channels = { 0: 1, 2: 3, 4: 2, 6: 4 }[colorType as 0 | 2 | 4 | 6];
    const stride = width * channels;
    const recon = new Uint8Array(height * stride);
    for (let y = 0; y < height; y++) {
        const filter = raw[y * (stride + 1)];
        const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
        const out = recon.subarray(y * stride, (y + 1) * stride);
        const prev = y > 0 ? recon.subarray((y - 1) * stride, y * stride) : null;
        for (let x = 0; x < stride; x++) {
            const left = x >= channels ? out[x - channels] : 0;
            const up = prev ? prev[x] : 0;
            const upLeft = prev && x >= channels ? prev[x - channels] : 0;
            let v = row[x];
            if (filter === 1) v += left;
            else if (filter === 2) v += up;
            else if (filter === 3) v += (left + up) >> 1;
            else if (filter === 4) v += paeth(left, up, upLeft);
            else if (filter !== 0) throw new Error(`unsupported filter ${filter}`);
            out[x] = v & 0xff;
        }
    }
    const gray = new Uint8Array(width * height);
    for (let i = 0; i < width * height; i++) {
        const base = i * channels;
        if (channels === 1 || channels === 2) {
            gray[i] = recon[base];
        } else {
            gray[i] = Math.round(
                0.299 * recon[base] + 0.587 * recon[base + 1] + 0.114 * recon[base + 2],
            );
        }
    }
    return { width, height, gray };
}

const B64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

export function bytesToBase64(bytes: Uint8Array): string {
    let out = "";
    for (let i = 0; i < bytes.length; i += 3) {
        const a = bytes[i];
        const b = i + 1 < bytes.length ? bytes[i + 1] : 0;
        const c = i + 2 < bytes.length ? bytes[i + 2] : 0;
        out += B64[a >> 2] + B64[((a & 3) << 4) | (b >> 4)];
        out += i + 1 < bytes.length ? B64[((b & 15) << 2) | (c >> 6)] : "=";
        out += i + 2 < bytes.length ? B64[c & 63] : "=";
    }
    return out;
}

export function base64ToBytes(text: string): Uint8Array {
    const clean = text.replace(/[^A-Za-z0-9+/]/g, "");
    const outLen = Math.floor((clean.length * 3) / 4);
    const out = new Uint8Array(outLen);
    let pos = 0;
    for (let i = 0; i < clean.length; i += 4) {
        const n =
            (B64.indexOf(clean[i]) << 18) |
            (B64.indexOf(clean[i + 1]) << 12) |
            ((i + 2 < clean.length ? B64.indexOf(clean[i + 2]) : 0) << 6) |
            (i + 3 < clean.length ? B64.indexOf(clean[i + 3]) : 0);
        if (pos < outLen) out[pos++] = (n >> 16) & 0xff;
        if (pos < outLen) out[pos++] = (n >> 8) & 0xff;
        if (pos < outLen) out[pos++] = n & 0xff;
    }
    return out;
}
