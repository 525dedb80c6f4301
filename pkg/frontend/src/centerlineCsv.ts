// Parses the centerline CSV from the handshake: s_mm,x,y,z,radius_mm,visited.

export interface CenterlineData {
    s: Float64Array;
    points: Float32Array; // flat xyz
    radius: Float64Array;
    visited: Uint8Array;
    count: number;
}

export function parseCenterlineCsv(text: string): CenterlineData {
    const lines = text.trim().split("\n");
    if (!lines[0].startsWith("s_mm,")) {
        throw new Error(`unexpected centerline header: ${lines[0]}`);
    }
    const count = lines.length - 1;
    const s = new Float64Array(count);
    const points = new Float32Array(count * 3);
    const radius = new Float64Array(count);
    const visited = new Uint8Array(count);
    for (let i = 0; i < count; i++) {
        const cols = lines[i + 1].split(",");
        if (cols.length !== 6) {
            throw new Error(`bad centerline row ${i + 2}: ${lines[i + 1]}`);
        }
        s[i] = Number(cols[0]);
        points[3 * i] = Number(cols[1]);
        points[3 * i + 1] = Number(cols[2]);
        points[3 * i + 2] = Number(cols[3]);
        radius[i] = Number(cols[4]);
        visited[i] = Number(cols[5]) ? 1 : 0;
    }
    return { s, points, radius, visited, count };
}
