// Three.js scene fed exclusively by server messages. The viewer keeps no
// authoritative state: camera pose, visited painting, toggles, heatmap and
// bookmarks all come from snapshots and on-demand frames, so reconnecting
// and replaying the next snapshot reproduces the identical scene.

import * as THREE from "three";

import { parseCenterlineCsv, type CenterlineData } from "./centerlineCsv.js";
import { parseObj, type ParsedMesh } from "./objParser.js";
import { decodeBase64, unpackBits, type ProtocolMessage } from "./protocol.js";

const VISITED_COLOR = new THREE.Color(0, 1, 0); // green per the reading UI
const UNVISITED_COLOR = new THREE.Color(1, 1, 1); // white until first visit
const WORLD_UP = new THREE.Vector3(0, 0, 1);

export interface SliceView {
    plane: string;
    index: number;
    shape: [number, number];
    pixels: Uint8Array; // 8-bit gray, row-major per shape
    crosshair: [number, number];
}

export interface BookmarkItem {
    id: number;
    s_mm: number;
    point: [number, number, number];
    class: string;
    note: string;
}

export interface Snapshot {
    t: number;
    s_mm: number;
    eye: [number, number, number];
    facing: [number, number, number];
    velocity_level: number;
    visited_fraction: number;
    visited: string;
    visited_count: number;
    wim_visible: boolean;
    heatmap_visible: boolean;
    started: boolean;
}

export class ViewerScene {
    scene = new THREE.Scene();
    camera = new THREE.PerspectiveCamera(90, 16 / 9, 0.5, 2000);

    colon: THREE.Mesh | null = null;
    midline: THREE.Line | null = null;
    wim = new THREE.Group();
    arrow: THREE.ArrowHelper;
    bookmarkMarkers = new THREE.Group();

    mode: "outside" | "inside" = "outside";
    centerline: CenterlineData | null = null;
    meshInfo: ParsedMesh | null = null;
    latestSnapshot: Snapshot | null = null;
    latestSlice: SliceView | null = null;
    bookmarks: BookmarkItem[] = [];
    heatmapBytes: Uint8Array | null = null;
    heatmapVisible = false;
    tickHz = 72;

    constructor() {
        // orientation cue: always points world-vertical, never parented to
        // the camera rotation
        this.arrow = new THREE.ArrowHelper(WORLD_UP.clone(), new THREE.Vector3(), 20, 0xffcc00);
        this.scene.add(this.arrow);
        this.scene.add(this.wim);
        this.scene.add(this.bookmarkMarkers);
        this.wim.visible = false;
        this.scene.add(new THREE.AmbientLight(0xffffff, 0.6));
    }

    buildFromHandshake(hello: ProtocolMessage): void {
        const mesh = parseObj(hello.mesh_obj as string);
        const line = parseCenterlineCsv(hello.centerline_csv as string);
        this.meshInfo = mesh;
        this.centerline = line;
        this.tickHz = (hello.tick_hz as number) ?? 72;

        const geometry = new THREE.BufferGeometry();
        geometry.setAttribute("position", new THREE.BufferAttribute(mesh.positions, 3));
        if (mesh.normals.length === mesh.positions.length) {
            geometry.setAttribute("normal", new THREE.BufferAttribute(mesh.normals, 3));
        }
        // heatmap arrives as raw uint8 RGB; a normalized attribute keeps the
        // exact server bytes in place
        const colors = new Uint8Array(mesh.vertexCount * 3).fill(255);
        geometry.setAttribute("color", new THREE.BufferAttribute(colors, 3, true));
        geometry.setIndex(new THREE.BufferAttribute(mesh.index, 1));
        const material = new THREE.MeshLambertMaterial({
            vertexColors: true,
            side: THREE.DoubleSide, // interior fly-through sees back faces
        });
        this.colon = new THREE.Mesh(geometry, material);
        this.scene.add(this.colon);

        const lineGeometry = new THREE.BufferGeometry();
        lineGeometry.setAttribute("position", new THREE.BufferAttribute(line.points, 3));
        const lineColors = new Float32Array(line.count * 3);
        lineGeometry.setAttribute("color", new THREE.BufferAttribute(lineColors, 3));
        this.midline = new THREE.Line(
            lineGeometry,
            new THREE.LineBasicMaterial({ vertexColors: true }),
        );
        this.scene.add(this.midline);
        this.paintVisited(line.visited);

        // WIM: same geometry, scaled into its box by the server transform
        const wimMesh = new THREE.Mesh(geometry, material);
        this.wim.add(wimMesh);
        if (hello.wim) {
            this.applyWim(hello.wim as { scale: number; center: number[] });
        }

        // exterior overview until the operator picks a start point
        this.frameExterior();
    }

    private frameExterior(): void {
        if (!this.colon) return;
        this.colon.geometry.computeBoundingSphere();
        const sphere = this.colon.geometry.boundingSphere!;
        const distance = sphere.radius * 2.2;
        this.camera.position.copy(sphere.center).add(new THREE.Vector3(0, -distance, distance * 0.4));
        this.camera.up.copy(WORLD_UP);
        this.camera.lookAt(sphere.center);
    }

    paintVisited(flags: ArrayLike<number>): void {
        if (!this.midline) return;
        const attr = this.midline.geometry.getAttribute("color") as THREE.BufferAttribute;
        for (let i = 0; i < flags.length; i++) {
            const c = flags[i] ? VISITED_COLOR : UNVISITED_COLOR;
            attr.setXYZ(i, c.r, c.g, c.b);
        }
        attr.needsUpdate = true;
    }

    visitedPaintedGreen(): boolean {
        if (!this.midline || !this.centerline) return false;
        const attr = this.midline.geometry.getAttribute("color") as THREE.BufferAttribute;
        for (let i = 0; i < this.centerline.count; i++) {
            if (attr.getX(i) !== 0 || attr.getY(i) !== 1 || attr.getZ(i) !== 0) return false;
        }
        return true;
    }

    applySnapshot(snap: Snapshot): void {
        this.latestSnapshot = snap;
        if (snap.started && this.mode === "outside") this.mode = "inside";
        if (this.mode === "inside") {
            const eye = new THREE.Vector3(...snap.eye);
            const facing = new THREE.Vector3(...snap.facing);
            this.camera.position.copy(eye);
            const up = Math.abs(facing.dot(WORLD_UP)) > 0.99
                ? new THREE.Vector3(0, 1, 0)
                : WORLD_UP;
            this.camera.up.copy(up);
            this.camera.lookAt(eye.clone().add(facing));
            // the vertical cue floats ahead of the camera but keeps world
            // orientation regardless of any camera roll
            this.arrow.position.copy(eye).addScaledVector(facing, 40);
        }
        if (snap.visited && snap.visited_count) {
            this.paintVisited(unpackBits(decodeBase64(snap.visited), snap.visited_count));
        }
        this.wim.visible = !!snap.wim_visible;
        this.heatmapVisible = !!snap.heatmap_visible;
    }

    applyHeatmap(message: ProtocolMessage): void {
        if (!this.colon || !this.meshInfo) return;
        const bytes = decodeBase64(message.colors as string);
        if (bytes.length !== this.meshInfo.vertexCount * 3) {
            throw new Error(
                `heatmap byte count ${bytes.length} != 3 x ${this.meshInfo.vertexCount} vertices`,
            );
        }
        this.heatmapBytes = bytes;
        const attr = this.colon.geometry.getAttribute("color") as THREE.BufferAttribute;
        (attr.array as Uint8Array).set(bytes);
        attr.needsUpdate = true;
    }

    colonColorBytes(): Uint8Array {
        const attr = this.colon!.geometry.getAttribute("color") as THREE.BufferAttribute;
        return attr.array as Uint8Array;
    }

    applySlice(message: ProtocolMessage): void {
        const shape = message.shape as [number, number];
        this.latestSlice = {
            plane: message.plane as string,
            index: message.index as number,
            shape,
            pixels: decodeBase64(message.pixels as string),
            crosshair: message.crosshair as [number, number],
        };
    }

    applyBookmarks(message: ProtocolMessage): void {
        this.bookmarks = message.items as BookmarkItem[];
        this.bookmarkMarkers.clear();
        for (const item of this.bookmarks) {
            const marker = new THREE.Mesh(
                new THREE.SphereGeometry(1.5, 8, 8),
                new THREE.MeshBasicMaterial({ color: 0xff4444 }),
            );
            marker.position.set(...item.point);
            marker.userData.bookmarkId = item.id;
            this.bookmarkMarkers.add(marker);
        }
    }

    applyWim(wim: { scale: number; center: number[] }): void {
        const mesh = this.wim.children[0];
        if (!mesh) return;
        mesh.scale.setScalar(wim.scale);
        const c = new THREE.Vector3(...(wim.center as [number, number, number]));
        mesh.position.copy(c.multiplyScalar(-wim.scale));
    }

    arrowWorldDirection(): THREE.Vector3 {
        // ArrowHelper's local +Y is its shaft; report it in world space
        return new THREE.Vector3(0, 1, 0).applyQuaternion(this.arrow.quaternion);
    }
}
