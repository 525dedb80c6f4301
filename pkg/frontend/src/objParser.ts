// Parses the OBJ subset the server emits in the handshake: v / vn records
// and triangular f records with v//vn references.

export interface ParsedMesh {
    positions: Float32Array; // flat xyz
    normals: Float32Array;
    index: Uint32Array; // flat triangle indices
    vertexCount: number;
    triangleCount: number;
}

export function parseObj(text: string): ParsedMesh {
    const positions: number[] = [];
    const normals: number[] = [];
    const index: number[] = [];
    for (const line of text.split("\n")) {
        if (line.startsWith("v ")) {
            const [, x, y, z] = line.split(/\s+/);
            positions.push(Number(x), Number(y), Number(z));
        } else if (line.startsWith("vn ")) {
            const [, x, y, z] = line.split(/\s+/);
            normals.push(Number(x), Number(y), Number(z));
        } else if (line.startsWith("f ")) {
            const refs = line.split(/\s+/).slice(1, 4);
            if (refs.length !== 3) {
                throw new Error(`non-triangular face: ${line}`);
            }
            for (const ref of refs) {
                index.push(Number(ref.split("/")[0]) - 1);
            }
        }
    }
    const vertexCount = positions.length / 3;
    if (vertexCount === 0 || index.length === 0) {
        throw new Error("OBJ contains no geometry");
    }
    for (const i of index) {
        if (!(i >= 0 && i < vertexCount)) {
            throw new Error(`face index ${i + 1} out of range (truncated OBJ?)`);
        }
    }
    return {
        positions: new Float32Array(positions),
        normals: new Float32Array(normals),
        index: new Uint32Array(index),
        vertexCount,
        triangleCount: index.length / 3,
    };
}
