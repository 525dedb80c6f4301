// Protocol client: frames bytes off the transport, routes messages into the
// scene, and exposes awaitable hooks so callers (and tests) can wait for
// specific server frames.

import { encodeFrame, FrameDecoder, type ProtocolMessage } from "./protocol.js";
import type { ViewerScene, Snapshot } from "./scene.js";
import type { Transport } from "./transport.js";

type Waiter = {
    predicate: (message: ProtocolMessage) => boolean;
    resolve: (message: ProtocolMessage) => void;
};

export class ViewerClient {
    readonly scene: ViewerScene;
    private transport: Transport;
    private decoder = new FrameDecoder();
    private waiters: Waiter[] = [];
    private helloResolve!: (hello: ProtocolMessage) => void;
    readonly hello: Promise<ProtocolMessage>;
    errors: ProtocolMessage[] = [];
    closed = false;

    constructor(transport: Transport, scene: ViewerScene) {
        this.transport = transport;
        this.scene = scene;
        this.hello = new Promise((resolve) => {
            this.helloResolve = resolve;
        });
        transport.onData((chunk) => {
            for (const message of this.decoder.push(chunk)) {
                this.handle(message);
            }
        });
        transport.onClose(() => {
            this.closed = true;
        });
    }

    private handle(message: ProtocolMessage): void {
        switch (message.kind) {
            case "hello":
                this.scene.buildFromHandshake(message);
                this.helloResolve(message);
                break;
            case "snapshot":
                this.scene.applySnapshot(message as unknown as Snapshot);
                break;
            case "heatmap":
                this.scene.applyHeatmap(message);
                break;
            case "slice":
                this.scene.applySlice(message);
                break;
            case "bookmarks":
                this.scene.applyBookmarks(message);
                break;
            case "wim":
                this.scene.applyWim(message as unknown as { scale: number; center: number[] });
                break;
            case "error":
                this.errors.push(message);
                break;
            default:
                break; // forward-compatible: ignore unknown frames
        }
        const still: Waiter[] = [];
        for (const waiter of this.waiters) {
            if (waiter.predicate(message)) waiter.resolve(message);
            else still.push(waiter);
        }
        this.waiters = still;
    }

    send(kind: string, payload: Record<string, unknown> = {}): void {
        this.transport.send(encodeFrame({ kind, payload }));
    }

    waitFor(
        predicate: (message: ProtocolMessage) => boolean,
        timeoutMs = 30000,
        label = "message",
    ): Promise<ProtocolMessage> {
        return new Promise((resolve, reject) => {
            const timer = setTimeout(
                () => reject(new Error(`timed out waiting for ${label}`)),
                timeoutMs,
            );
            this.waiters.push({
                predicate,
                resolve: (message) => {
                    clearTimeout(timer);
                    resolve(message);
                },
            });
        });
    }

    close(): void {
        this.transport.close();
    }
}
