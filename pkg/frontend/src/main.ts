// Browser entry point. The session server speaks raw TCP, so point this at
// a websocket bridge in front of it, e.g.:
//     ivc serve --dir colon/ --port 4700
//     websockify 8080 127.0.0.1:4700
// then open the page with ?ws=ws://127.0.0.1:8080.

import * as THREE from "three";

import { ViewerClient } from "./client.js";
import { initialInputState, mapInput, type UserAction } from "./input.js";
import { ViewerScene } from "./scene.js";
import { WebSocketTransport } from "./transport.js";

const LEGEND = [
    "drag: rotate (outside) / look (inside)",
    "click: pick start point (outside) / use tool (inside)",
    "0-4 or +/-: velocity | t/b/m/x: teleport, bookmark, measure, slice tool",
    "w: world-in-miniature | h: coverage heatmap",
].join("\n");

async function boot(): Promise<void> {
    const params = new URLSearchParams(window.location.search);
    const url = params.get("ws") ?? "ws://127.0.0.1:8080";

    const scene = new ViewerScene();
    const transport = new WebSocketTransport(url);
    await transport.ready();
    const client = new ViewerClient(transport, scene);
    let input = { ...initialInputState, connected: true };

    const renderer = new THREE.WebGLRenderer({ antialias: true });
    renderer.setSize(window.innerWidth, window.innerHeight);
    document.body.style.margin = "0";
    document.body.appendChild(renderer.domElement);

    const legend = document.createElement("pre");
    legend.textContent = LEGEND;
    legend.style.cssText =
        "position:fixed;left:8px;bottom:8px;color:#eee;background:#0008;padding:6px;font:12px monospace";
    document.body.appendChild(legend);

    await client.hello;

    const raycaster = new THREE.Raycaster();
    const pointer = new THREE.Vector2();

    const dispatch = (action: UserAction) => {
        input = { ...input, mode: scene.mode };
        const result = mapInput(input, action);
        input = result.state;
        if (result.message) client.send(result.message.kind, result.message.payload);
    };

    window.addEventListener("keydown", (event) => dispatch({ type: "key", key: event.key }));

    renderer.domElement.addEventListener("click", (event) => {
        pointer.set(
            (event.clientX / window.innerWidth) * 2 - 1,
            -(event.clientY / window.innerHeight) * 2 + 1,
        );
        raycaster.setFromCamera(pointer, scene.camera);
        const origin = raycaster.ray.origin;
        const direction = raycaster.ray.direction;
        dispatch({
            type: "pick",
            origin: [origin.x, origin.y, origin.z],
            direction: [direction.x, direction.y, direction.z],
        });
    });

    let yaw = 0;
    let pitch = 0;
    renderer.domElement.addEventListener("mousemove", (event) => {
        if (!(event.buttons & 1) || scene.mode !== "inside") return;
        yaw -= event.movementX * 0.003;
        pitch = Math.max(-1.4, Math.min(1.4, pitch - event.movementY * 0.003));
        const snap = scene.latestSnapshot;
        if (!snap) return;
        const facing = new THREE.Vector3(
            Math.cos(pitch) * Math.cos(yaw),
            Math.cos(pitch) * Math.sin(yaw),
            Math.sin(pitch),
        );
        dispatch({
            type: "look",
            eye: snap.eye,
            facing: [facing.x, facing.y, facing.z],
        });
    });

    const frame = () => {
        renderer.render(scene.scene, scene.camera);
        requestAnimationFrame(frame);
    };
    frame();
}

boot().catch((error) => {
    const banner = document.createElement("div");
    banner.style.cssText = "color:#fff;background:#a00;padding:12px;font:14px monospace";
    banner.textContent = `connection failed: ${error}` + " — retry by reloading the page";
    document.body.prepend(banner);
});
