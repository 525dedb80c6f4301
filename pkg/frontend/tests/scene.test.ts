import { describe, expect, it } from "vitest";
import * as THREE from "three";

import { ViewerScene, type Snapshot } from "../src/scene.js";

function toBase64(bytes: Uint8Array): string {
    return Buffer.from(bytes).toString("base64");
}

// tiny scene: a single triangle and a 3-station centerline
const HELLO = {
    kind: "hello",
    mesh_obj: "v 0 0 0\nv 10 0 0\nv 0 10 0\nvn 0 0 1\nvn 0 0 1\nvn 0 0 1\nf 1//1 2//2 3//3\n",
    centerline_csv:
        "s_mm,x,y,z,radius_mm,visited\n0,0,0,0,5,0\n1,1,0,0,5,0\n2,2,0,0,5,0\n",
    tick_hz: 72,
    speeds_mm_s: [0, 5, 10, 20, 40],
    wim: { scale: 0.3, center: [5, 5, 0] },
};

function snapshot(overrides: Partial<Snapshot> = {}): Snapshot {
    return {
        t: 1.0,
        s_mm: 1.0,
        eye: [1, 0, 0],
        facing: [1, 0, 0],
        velocity_level: 2,
        visited_fraction: 1 / 3,
        visited: toBase64(new Uint8Array([0b10000000])), // station 0 only
        visited_count: 3,
        wim_visible: false,
        heatmap_visible: false,
        started: true,
        ...overrides,
    };
}

describe("handshake", () => {
    it("builds the colon and mid-line from the hello frame", () => {
        const scene = new ViewerScene();
        scene.buildFromHandshake(HELLO);
        expect(scene.meshInfo?.triangleCount).toBe(1);
        expect(scene.centerline?.count).toBe(3);
        expect(scene.mode).toBe("outside");
    });
});

describe("snapshots drive everything", () => {
    it("applies camera pose and switches to inside mode", () => {
        const scene = new ViewerScene();
        scene.buildFromHandshake(HELLO);
        scene.applySnapshot(snapshot());
        expect(scene.mode).toBe("inside");
        expect(scene.camera.position.toArray()).toEqual([1, 0, 0]);
        const forward = new THREE.Vector3();
        scene.camera.getWorldDirection(forward);
        expect(forward.x).toBeCloseTo(1, 5);
    });

    it("paints exactly the visited stations green", () => {
        const scene = new ViewerScene();
        scene.buildFromHandshake(HELLO);
        scene.applySnapshot(snapshot());
        const attr = scene.midline!.geometry.getAttribute("color");
        expect([attr.getX(0), attr.getY(0), attr.getZ(0)]).toEqual([0, 1, 0]);
        expect([attr.getX(1), attr.getY(1), attr.getZ(1)]).toEqual([1, 1, 1]);
        expect(scene.visitedPaintedGreen()).toBe(false);

        scene.applySnapshot(
            snapshot({ visited: toBase64(new Uint8Array([0b11100000])), visited_fraction: 1 }),
        );
        expect(scene.visitedPaintedGreen()).toBe(true);
    });

    it("reproduces an identical scene from the same snapshot after reconnect", () => {
        const a = new ViewerScene();
        const b = new ViewerScene();
        a.buildFromHandshake(HELLO);
        b.buildFromHandshake(HELLO);
        const snap = snapshot({ wim_visible: true });
        a.applySnapshot(snap);
        // "b" missed earlier traffic entirely; one snapshot resynchronizes it
        b.applySnapshot(snap);
        expect(b.camera.position.toArray()).toEqual(a.camera.position.toArray());
        expect(b.wim.visible).toBe(a.wim.visible);
        expect(b.visitedPaintedGreen()).toBe(a.visitedPaintedGreen());
    });

    it("keeps the orientation arrow world-vertical under camera roll", () => {
        const scene = new ViewerScene();
        scene.buildFromHandshake(HELLO);
        scene.applySnapshot(snapshot({ facing: [0, 1, 0] }));
        const before = scene.arrowWorldDirection().toArray();
        // simulate an extreme head tilt: facing swings, camera rolls
        scene.applySnapshot(snapshot({ facing: [0, 0, 1] }));
        scene.camera.rotateZ(1.2);
        const after = scene.arrowWorldDirection().toArray();
        expect(after[0]).toBeCloseTo(before[0], 10);
        expect(after[1]).toBeCloseTo(before[1], 10);
        expect(after[2]).toBeCloseTo(before[2], 10);
        expect(after[2]).toBeCloseTo(1, 10); // world +Z
    });
});

describe("server payloads", () => {
    it("applies heatmap bytes verbatim to the vertex colors", () => {
        const scene = new ViewerScene();
        scene.buildFromHandshake(HELLO);
        const colors = new Uint8Array([255, 0, 0, 0, 255, 0, 0, 0, 255]);
        scene.applyHeatmap({ kind: "heatmap", colors: toBase64(colors) });
        expect(Array.from(scene.colonColorBytes())).toEqual(Array.from(colors));
    });

    it("rejects a heatmap with the wrong vertex count", () => {
        const scene = new ViewerScene();
        scene.buildFromHandshake(HELLO);
        expect(() =>
            scene.applyHeatmap({ kind: "heatmap", colors: toBase64(new Uint8Array(5)) }),
        ).toThrow(/byte count/);
    });

    it("stores the latest slice with its crosshair", () => {
        const scene = new ViewerScene();
        scene.buildFromHandshake(HELLO);
        scene.applySlice({
            kind: "slice",
            plane: "axial",
            index: 4,
            shape: [2, 2],
            pixels: toBase64(new Uint8Array([0, 64, 128, 255])),
            crosshair: [1, 1],
        });
        expect(scene.latestSlice?.plane).toBe("axial");
        expect(scene.latestSlice?.pixels.length).toBe(4);
        expect(scene.latestSlice?.crosshair).toEqual([1, 1]);
    });

    it("places bookmark markers", () => {
        const scene = new ViewerScene();
        scene.buildFromHandshake(HELLO);
        scene.applyBookmarks({
            kind: "bookmarks",
            items: [
                { id: 1, s_mm: 1.5, point: [1, 2, 3], class: "Serrated", note: "" },
            ],
        });
        expect(scene.bookmarkMarkers.children).toHaveLength(1);
        expect(scene.bookmarkMarkers.children[0].position.toArray()).toEqual([1, 2, 3]);
    });
});
