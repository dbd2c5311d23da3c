/** Numeric status codes, embedded-style: no exceptions on the load path. */
export enum Status {
    OK = 0,
    BAD_MAGIC = 1,
    BAD_VERSION = 2,
    BAD_CRC = 3,
    TRUNCATED = 4,
    MALFORMED = 5,
    CAPACITY = 6,
    UNLOADED = 7,
}

/** Fixed capacities; buffers are sized once at load, never after. */
export const LIMITS = {
    maxParameters: 32768,
    maxMelFilters: 64,
    maxFrames: 64,
    maxFftSize: 1024,
    maxWindowSamples: 32768,
    maxClasses: 16,
} as const;
