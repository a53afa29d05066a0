import { inflateSync } from "node:zlib";

import { describe, expect, it } from "vitest";

import {
    base64ToBytes,
    bytesToBase64,
    decodePng,
    encodeGrayPng,
} from "../src/png.js";

const inflate = (data: Uint8Array) => new Uint8Array(inflateSync(data));

// 5x7 Pillow-encoded 0/255 mask, generated server-side once
const PILLOW_B64 =
    "iVBORw0KGgoAAAANSUhEUgAAAAcAAAAFCAAAAACs8akEAAAAHklEQVR4nDXHsQ0AAAjDMJf/fy4DIosVBUKRufV+C0RtAgUTJfL8AAAAAElFTkSuQmCC";
const PILLOW_PIXELS = [
    "1000000",
    "0011110",
    "0011110",
    "0011110",
    "0000000",
];

describe("png codec", () => {
    it("round-trips encode -> decode pixel-identically", () => {
        const width = 23;
        const height = 11;
        const gray = new Uint8Array(width * height);
        for (let i = 0; i < gray.length; i++) {
            gray[i] = (i * 37) % 2 === 0 ? 255 : 0;
        }
        const decoded = decodePng(encodeGrayPng(width, height, gray), inflate);
        expect(decoded.width).toBe(width);
        expect(decoded.height).toBe(height);
        expect(Array.from(decoded.gray)).toEqual(Array.from(gray));
    });

    it("encoding is byte-deterministic", () => {
        const gray = new Uint8Array([0, 255, 255, 0]);
        const a = encodeGrayPng(2, 2, gray);
        const b = encodeGrayPng(2, 2, gray);
        expect(Array.from(a)).toEqual(Array.from(b));
    });

    it("handles images wider than one stored deflate block", () => {
        const width = 300;
        const height = 250; // raw stream > 65535 bytes
        const gray = new Uint8Array(width * height).map((_, i) => i % 251);
        const decoded = decodePng(encodeGrayPng(width, height, gray), inflate);
        expect(Array.from(decoded.gray)).toEqual(Array.from(gray));
    });

    it("decodes a server-produced (Pillow) mask PNG", () => {
        const decoded = decodePng(base64ToBytes(PILLOW_B64), inflate);
        expect(decoded.width).toBe(7);
        expect(decoded.height).toBe(5);
        const rows: string[] = [];
        for (let y = 0; y < 5; y++) {
            let row = "";
            for (let x = 0; x < 7; x++) {
                row += decoded.gray[y * 7 + x] !== 0 ? "1" : "0";
            }
            rows.push(row);
        }
        expect(rows).toEqual(PILLOW_PIXELS);
    });

    it("rejects non-png payloads", () => {
        expect(() => decodePng(new Uint8Array([1, 2, 3, 4]), inflate)).toThrow(/not a PNG/);
    });

    it("base64 helpers round-trip arbitrary bytes", () => {
        for (const len of [0, 1, 2, 3, 4, 5, 31, 255]) {
            const bytes = new Uint8Array(len).map((_, i) => (i * 101 + len) % 256);
            const back = base64ToBytes(bytesToBase64(bytes));
            expect(Array.from(back)).toEqual(Array.from(bytes));
        }
    });
});
