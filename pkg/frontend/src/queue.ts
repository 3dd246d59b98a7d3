// Slider-to-server synchronization with at most one in-flight request.
//
// Sliders report absolute target positions; the queue converts each into
// the delta the server expects (add: difference, mul: ratio) against the
// last acknowledged cumulative value, coalescing rapid movements so only
// the newest target per slider is sent.

import type { EditDelta, Region, Which } from "./api.js";
import { sliderKey } from "./session.js";

export interface SliderTarget {
	region: Region;
	channel: string;
	which: Which;
	value: number;
}

export type SendFn = (edit: EditDelta) => Promise<unknown>;
export type AckFn = (edit: EditDelta) => void;
export type RevertFn = (target: SliderTarget, appliedValue: number, error: unknown) => void;

const EPS = 1e-9;

export class SliderSync {
	private applied = new Map<string, number>();
	private pending = new Map<string, SliderTarget>();
	private inflight = false;

	constructor(
		private send: SendFn,
		private onAck: AckFn = () => {},
		private onRevert: RevertFn = () => {},
	) {}

	/** Cumulative value the server currently holds for a slider. */
	appliedValue(target: Pick<SliderTarget, "region" | "channel" | "which">): number {
		const key = sliderKey(target.region, target.channel, target.which);
		return this.applied.get(key) ?? (target.which === "mul" ? 1 : 0);
	}

	/** Record an acknowledged edit that arrived outside this queue (undo,
	 *  session reload); keeps delta computation consistent. */
	primeApplied(target: Pick<SliderTarget, "region" | "channel" | "which">, value: number): void {
		this.applied.set(sliderKey(target.region, target.channel, target.which), value);
	}

	get busy(): boolean {
		return this.inflight || this.pending.size > 0;
	}

	setTarget(target: SliderTarget): void {
		this.pending.set(sliderKey(target.region, target.channel, target.which), target);
		void this.pump();
	}

	/** Resolves when every pending target has been acknowledged or reverted. */
	async flush(): Promise<void> {
		while (this.busy) {
			await this.pump();
		}
	}

	private async pump(): Promise<void> {
		if (this.inflight) return;
		const next = this.pending.entries().next();
		if (next.done) return;
		const [key, target] = next.value;
		this.pending.delete(key);

		const current = this.applied.get(key) ?? (target.which === "mul" ? 1 : 0);
		let value: number;
		if (target.which === "mul") {
			if (Math.abs(current) < EPS || Math.abs(target.value / current - 1) < EPS) {
				return this.pump();
			}
			value = target.value / current;
		} else {
			if (Math.abs(target.value - current) < EPS) {
				return this.pump();
			}
			value = target.value - current;
		}

		const edit: EditDelta = {
			region: target.region,
			channel: target.channel,
			op: target.which,
			value,
		};
		this.inflight = true;
		try {
			await this.send(edit);
			this.applied.set(key, target.value);
			this.onAck(edit);
		} catch (error) {
			this.onRevert(target, current, error);
		} finally {
			this.inflight = false;
		}
		return this.pump();
	}
}
