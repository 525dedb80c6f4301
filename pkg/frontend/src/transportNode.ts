// Node-only TCP transport; kept out of transport.ts so browser bundles
// never import 'net'.

import * as net from "node:net";

import type { Transport } from "./transport.js";

export class TcpTransport implements Transport {
    private socket: net.Socket;

    private constructor(socket: net.Socket) {
        this.socket = socket;
    }

    static connect(host: string, port: number): Promise<TcpTransport> {
        return new Promise((resolve, reject) => {
            const socket = net.createConnection({ host, port, noDelay: true });
            socket.once("connect", () => resolve(new TcpTransport(socket)));
            socket.once("error", reject);
        });
    }

    send(data: Uint8Array): void {
        this.socket.write(data);
    }

    onData(handler: (chunk: Uint8Array) => void): void {
        this.socket.on("data", (chunk: Buffer) => {
            handler(new Uint8Array(chunk.buffer, chunk.byteOffset, chunk.byteLength));
        });
    }

    onClose(handler: () => void): void {
        this.socket.on("close", handler);
    }

    close(): void {
        this.socket.destroy();
    }
}
