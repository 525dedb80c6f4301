// Pure mapping from user gestures to protocol messages. Keeping it a pure
// function (state in, message + state out) makes every binding testable
// without a DOM.

import type { ClientEvent } from "./protocol.js";

export type Tool = "teleport" | "bookmark" | "measure" | "slice";

export interface InputState {
    mode: "outside" | "inside";
    velocityLevel: number;
    activeTool: Tool;
    measurePending: boolean;
    connected: boolean;
}

export const initialInputState: InputState = {
    mode: "outside",
    velocityLevel: 0,
    activeTool: "teleport",
    measurePending: false,
    connected: false,
};

export type UserAction =
    | { type: "key"; key: string }
    | { type: "pick"; origin: [number, number, number]; direction: [number, number, number] }
    | { type: "look"; eye: [number, number, number]; facing: [number, number, number] }
    | { type: "goto"; id: number };

export interface MappedInput {
    message: ClientEvent | null;
    state: InputState;
}

const TOOL_KEYS: Record<string, Tool> = {
    t: "teleport",
    b: "bookmark",
    m: "measure",
    x: "slice",
};

const PICK_KIND: Record<Tool, string> = {
    teleport: "point_teleport",
    bookmark: "point_bookmark",
    measure: "point_measure_a", // alternates with _b via measurePending
    slice: "point_slice",
};

export function mapInput(state: InputState, action: UserAction): MappedInput {
    if (!state.connected) {
        return { message: null, state };
    }

    if (action.type === "key") {
        const key = action.key.toLowerCase();
        if (key === "w") return { message: { kind: "toggle_wim", payload: {} }, state };
        if (key === "h") return { message: { kind: "toggle_heatmap", payload: {} }, state };
        if (key in TOOL_KEYS) {
            return { message: null, state: { ...state, activeTool: TOOL_KEYS[key], measurePending: false } };
        }
        if (state.mode !== "inside") return { message: null, state };
        let level: number | null = null;
        if (key === "+" || key === "=") level = Math.min(state.velocityLevel + 1, 4);
        else if (key === "-") level = Math.max(state.velocityLevel - 1, 0);
        else if (key >= "0" && key <= "4") level = Number(key);
        if (level === null || level === state.velocityLevel) {
            return { message: null, state };
        }
        return {
            message: { kind: "velocity", payload: { level } },
            state: { ...state, velocityLevel: level },
        };
    }

    if (action.type === "look") {
        if (state.mode !== "inside") return { message: null, state };
        return {
            message: { kind: "head_pose", payload: { eye: action.eye, facing: action.facing } },
            state,
        };
    }

    if (action.type === "goto") {
        return { message: { kind: "goto_bookmark", payload: { id: action.id } }, state };
    }

    // pick: outside chooses the start point, inside applies the active tool
    const ray = { origin: action.origin, direction: action.direction };
    if (state.mode === "outside") {
        return { message: { kind: "start_at", payload: ray }, state };
    }
    if (state.activeTool === "measure") {
        const kind = state.measurePending ? "point_measure_b" : "point_measure_a";
        return {
            message: { kind, payload: ray },
            state: { ...state, measurePending: !state.measurePending },
        };
    }
    return { message: { kind: PICK_KIND[state.activeTool], payload: ray }, state };
}
