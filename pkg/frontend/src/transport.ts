// Transport abstraction so the client logic is testable without a browser.
// TcpTransport (Node) speaks the server's protocol directly; the browser
// build uses WebSocketTransport through a TCP<->WS bridge (see README).

export interface Transport {
    send(data: Uint8Array): void;
    onData(handler: (chunk: Uint8Array) => void): void;
    onClose(handler: () => void): void;
    close(): void;
}

export class WebSocketTransport implements Transport {
    private socket: WebSocket;
    private dataHandler: ((chunk: Uint8Array) => void) | null = null;
    private closeHandler: (() => void) | null = null;

    constructor(url: string) {
        this.socket = new WebSocket(url);
        this.socket.binaryType = "arraybuffer";
        this.socket.onmessage = (event) => {
            if (this.dataHandler) this.dataHandler(new Uint8Array(event.data as ArrayBuffer));
        };
        this.socket.onclose = () => {
            if (this.closeHandler) this.closeHandler();
        };
    }

    ready(): Promise<void> {
        if (this.socket.readyState === WebSocket.OPEN) return Promise.resolve();
        return new Promise((resolve, reject) => {
            this.socket.onopen = () => resolve();
            this.socket.onerror = (event) => reject(event);
        });
    }

    send(data: Uint8Array): void {
        // re-pack so the payload sits in its own non-shared ArrayBuffer
        this.socket.send(new Uint8Array(data).buffer);
    }

    onData(handler: (chunk: Uint8Array) => void): void {
        this.dataHandler = handler;
    }

    onClose(handler: () => void): void {
        this.closeHandler = handler;
    }

    close(): void {
        this.socket.close();
    }
}
