import { describe, expect, it } from 'vitest';
import { HEADER_SIZE, readDump, writeDump, type AdtpDump } from '../src/adtp.js';
import { FormatError, ShapeMismatch } from '../src/errors.js';

function smallDump(): AdtpDump {
  return {
    n: 2,
    c: 3,
    d: 4,
    numLayers: 2,
    nonspatialCount: 1,
    meta: { b: 'two', a: 'one' },
    frameEmbeddings: Float32Array.from({ length: 8 }, (_, i) => i * 0.25 - 1),
    textEmbedding: Float32Array.from([0.5, -0.5, 1.5, 0.125]),
    attention: Float32Array.from({ length: 12 }, (_, i) => i * 0.1),
  };
}

describe('writeDump', () => {
  it('lays out the header little-endian', () => {
    const blob = writeDump(smallDump());
    expect(blob.toString('ascii', 0, 4)).toBe('ADTP');
    expect(blob.readUInt32LE(4)).toBe(1);
    expect(blob.readUInt32LE(8)).toBe(2);
    expect(blob.readUInt32LE(12)).toBe(3);
    expect(blob.readUInt32LE(16)).toBe(4);
    expect(blob.readUInt32LE(20)).toBe(2);
    expect(blob.readUInt32LE(24)).toBe(1);
    const metaLen = blob.readUInt32LE(28);
    expect(blob.toString('utf8', HEADER_SIZE, HEADER_SIZE + metaLen)).toBe('{"a":"one","b":"two"}');
    expect(blob.length).toBe(HEADER_SIZE + metaLen + 4 * (8 + 4 + 12));
  });

  it('rejects shape and value problems', () => {
    const short = smallDump();
    short.textEmbedding = Float32Array.from([1, 2]);
    expect(() => writeDump(short)).toThrow(ShapeMismatch);

    const negative = smallDump();
    negative.attention[5] = -0.25;
    expect(() => writeDump(negative)).toThrow(/negative/);

    const nan = smallDump();
    nan.frameEmbeddings[0] = Number.NaN;
    expect(() => writeDump(nan)).toThrow(/non-finite/);
  });
});

describe('readDump', () => {
  it('round-trips bit-identically', () => {
    const blob = writeDump(smallDump());
    const back = readDump(blob);
    expect(writeDump(back).equals(blob)).toBe(true);
    expect(back.meta).toEqual({ a: 'one', b: 'two' });
    expect(Array.from(back.attention)).toEqual(Array.from(smallDump().attention));
  });

  it('rejects bad magic, version, truncation, trailing bytes, bad meta', () => {
    const blob = writeDump(smallDump());

    const magic = Buffer.from(blob);
    magic.write('XDTP', 0, 'ascii');
    expect(() => readDump(magic)).toThrow(/magic/);

    const version = Buffer.from(blob);
    version.writeUInt32LE(2, 4);
    expect(() => readDump(version)).toThrow(/version/);

    expect(() => readDump(blob.subarray(0, 16))).toThrow(/header/);
    expect(() => readDump(blob.subarray(0, blob.length - 3))).toThrow(/truncated/);
    expect(() => readDump(Buffer.concat([blob, Buffer.from([0])]))).toThrow(/trailing/);

    const meta = Buffer.from(blob);
    meta.write('x', HEADER_SIZE, 'utf8');
    expect(() => readDump(meta)).toThrow(FormatError);
  });
});
