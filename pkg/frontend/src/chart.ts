/** Append-only rule-count chart drawn on a canvas. */

export class RuleChart {
    private counts: number[] = [];

    constructor(private canvas: HTMLCanvasElement | null = null) {}

    append(count: number): void {
        this.counts.push(count);
        this.draw();
    }

    values(): number[] {
        return [...this.counts];
    }

    /** Replace is only allowed to extend, never rewrite history. */
    syncWith(trajectory: number[]): boolean {
        const mine = this.counts;
        for (let i = 0; i < mine.length; i++) {
            if (trajectory[i] !== mine[i]) return false;
        }
        if (trajectory.length > mine.length) {
            this.counts = [...trajectory];
            this.draw();
        }
        return true;
    }

    draw(): void {
        const canvas = this.canvas;
        if (!canvas) return;
        const ctx = canvas.getContext("2d");
        if (!ctx) return;
        const { width, height } = canvas;
        ctx.clearRect(0, 0, width, height);
        ctx.strokeStyle = "#888";
        ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
        const counts = this.counts;
        if (counts.length === 0) return;
        const top = Math.max(...counts, 1);
        ctx.strokeStyle = "#0055aa";
        ctx.lineWidth = 2;
        ctx.beginPath();
        counts.forEach((c, i) => {
            const x = 8 + (width - 16) * (counts.length === 1 ? 0 : i / (counts.length - 1));
            const y = height - 8 - (height - 16) * (c / top);
            if (i === 0) ctx.moveTo(x, y);
            else ctx.lineTo(x, y);
        });
        ctx.stroke();
        ctx.fillStyle = "#333";
        ctx.font = "11px sans-serif";
        ctx.fillText(`rules: ${counts[counts.length - 1]}`, 8, 14);
    }
}
