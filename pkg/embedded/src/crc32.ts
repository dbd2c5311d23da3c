/** CRC-32 (IEEE 802.3 polynomial, zlib-compatible). */

const TABLE = new Uint32Array(256);
for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
        c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    TABLE[n] = c >>> 0;
}

export function crc32(bytes: Uint8Array, length?: number): number {
    const end = length ?? bytes.length;
    let crc = 0xffffffff;
    for (let i = 0; i < end; i++) {
        crc = TABLE[(crc ^ bytes[i]) & 0xff] ^ (crc >>> 8);
    }
    return (crc ^ 0xffffffff) >>> 0;
}
