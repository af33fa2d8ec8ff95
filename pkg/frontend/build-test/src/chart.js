// Support-profile chart: four bars in option order with a dotted vertical
// marker at the weighted mean. Pure data in, pure spec out, so the marker
// position is testable without a DOM.
export const OPTION_LABELS = ["A risk 20", "A risk 10", "B risk 10", "B risk 20"];
const SCALE = [-2, -1, 1, 2];
const MEAN_TOLERANCE = 1e-6;
export function weightedMean(profile) {
    if (profile.length !== 4) {
        throw new Error(`profile must have 4 components, got ${profile.length}`);
    }
    return profile.reduce((acc, w, i) => acc + w * SCALE[i], 0);
}
export function renderProfile(snapshot) {
    const { profile, mean, scope } = snapshot;
    if (!Array.isArray(profile) || profile.length !== 4) {
        throw new Error("malformed snapshot: profile must be 4 numbers");
    }
    if (profile.some((w) => typeof w !== "number" || !isFinite(w) || w < 0)) {
        throw new Error("malformed snapshot: negative or non-numeric support");
    }
    const total = profile.reduce((a, b) => a + b, 0);
    if (Math.abs(total - 1) > MEAN_TOLERANCE) {
        throw new Error(`malformed snapshot: profile sums to ${total}`);
    }
    const recomputed = weightedMean(profile);
    if (Math.abs(recomputed - mean) > MEAN_TOLERANCE) {
        throw new Error(`malformed snapshot: mean ${mean} but profile re-derives ${recomputed}`);
    }
    return {
        bars: profile.map((value, i) => ({ label: OPTION_LABELS[i], value })),
        meanX: (mean + 2) / 4,
        mean,
        scopeLabel: scope,
        dotted: true,
    };
}
// Minimal SVG rendering of a spec; the dotted mean marker is a dashed line.
export function chartSvg(spec, width = 360, height = 180) {
    const pad = 8;
    const innerW = width - 2 * pad;
    const innerH = height - 28;
    const barW = innerW / 4;
    const parts = [];
    spec.bars.forEach((bar, i) => {
        const h = Math.round(bar.value * innerH);
        const x = pad + i * barW + 4;
        const y = pad + (innerH - h);
        parts.push(`<rect class="bar bar-${i}" x="${x}" y="${y}" width="${Math.round(barW - 8)}" height="${h}"></rect>`);
        parts.push(`<text class="bar-label" x="${x + barW / 2 - 4}" y="${height - 6}" text-anchor="middle">${spec.bars[i].label}</text>`);
    });
    const meanPx = pad + spec.meanX * innerW;
    parts.push(`<line class="mean-line" x1="${meanPx}" y1="${pad}" x2="${meanPx}" y2="${pad + innerH}" stroke-dasharray="2,4"></line>`);
    parts.push(`<text class="mean-label" x="${meanPx}" y="${pad + 10}" text-anchor="middle">${spec.mean.toFixed(2)}</text>`);
    return `<svg viewBox="0 0 ${width} ${height}" role="img" aria-label="support profile">${parts.join("")}</svg>`;
}
