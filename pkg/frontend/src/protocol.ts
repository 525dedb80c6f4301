// Wire framing: 4-byte big-endian payload length, then UTF-8 JSON.

export interface ProtocolMessage {
    kind: string;
    [key: string]: unknown;
}

export interface ClientEvent {
    kind: string;
    payload: Record<string, unknown>;
}

const encoder = new TextEncoder();
const decoder = new TextDecoder();

export function encodeFrame(message: object): Uint8Array {
    const body = encoder.encode(JSON.stringify(message));
    const frame = new Uint8Array(4 + body.length);
    new DataView(frame.buffer).setUint32(0, body.length, false);
    frame.set(body, 4);
    return frame;
}

/** Incremental decoder; TCP chunks may split or merge frames arbitrarily. */
export class FrameDecoder {
    private buffer = new Uint8Array(0);

    push(chunk: Uint8Array): ProtocolMessage[] {
        const merged = new Uint8Array(this.buffer.length + chunk.length);
        merged.set(this.buffer);
        merged.set(chunk, this.buffer.length);
        this.buffer = merged;

        const messages: ProtocolMessage[] = [];
        while (this.buffer.length >= 4) {
            const view = new DataView(this.buffer.buffer, this.buffer.byteOffset);
            const length = view.getUint32(0, false);
            if (this.buffer.length < 4 + length) break;
            const body = this.buffer.subarray(4, 4 + length);
            messages.push(JSON.parse(decoder.decode(body)) as ProtocolMessage);
            this.buffer = this.buffer.slice(4 + length);
        }
        return messages;
    }
}

export function decodeBase64(text: string): Uint8Array {
    if (typeof Buffer !== "undefined") {
        return new Uint8Array(Buffer.from(text, "base64"));
    }
    const raw = atob(text);
    const out = new Uint8Array(raw.length);
    for (let i = 0; i < raw.length; i++) out[i] = raw.charCodeAt(i);
    return out;
}

/** Unpack numpy-style packbits (MSB first) into a boolean array. */
export function unpackBits(bytes: Uint8Array, count: number): Uint8Array {
    const out = new Uint8Array(count);
    for (let i = 0; i < count; i++) {
        out[i] = (bytes[i >> 3] >> (7 - (i & 7))) & 1;
    }
    return out;
}
