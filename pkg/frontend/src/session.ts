// Pure session state. The editor's view is a fold over (initial session,
// acknowledged edit history), so reloading the page reconstructs the exact
// same state from what the server reports.

import type { EditDelta, Region, SessionInfo, Which } from "./api.js";

export interface SliderValue {
	mul: number;
	add: number;
}

export interface SessionState {
	info: SessionInfo;
	history: EditDelta[]; // acknowledged edits, oldest first
	dirty: boolean;
}

export function initialState(info: SessionInfo): SessionState {
	return { info, history: [...info.edits], dirty: info.edits.length > 0 };
}

export function applyAck(state: SessionState, edit: EditDelta): SessionState {
	return { info: state.info, history: [...state.history, edit], dirty: true };
}

export function undoAck(state: SessionState): SessionState {
	if (state.history.length === 0) return state;
	const history = state.history.slice(0, -1);
	return { info: state.info, history, dirty: history.length > 0 };
}

export function sliderKey(region: Region, channel: string, which: Which): string {
	return `${region}:${channel}:${which}`;
}

/** Cumulative slider position for one (region, channel, which) pseudo-axis:
 *  the product of mul edits or the sum of add edits in the history. */
export function sliderValue(
	state: SessionState,
	region: Region,
	channel: string,
	which: Which,
): number {
	let value = which === "mul" ? 1 : 0;
	for (const e of state.history) {
		if (e.region !== region || e.channel !== channel || e.op !== which) continue;
		value = which === "mul" ? value * e.value : value + e.value;
	}
	return value;
}

export function allSliderValues(state: SessionState, region: Region): Map<string, SliderValue> {
	const out = new Map<string, SliderValue>();
	for (const channel of state.info.channels) {
		out.set(channel, {
			mul: sliderValue(state, region, channel, "mul"),
			add: sliderValue(state, region, channel, "add"),
		});
	}
	return out;
}

export interface SliderBounds {
	min: number;
	max: number;
	step: number;
}

// Soft ergonomic ranges; the mask planes themselves are unconstrained.
const ADD_RANGE: Record<string, Record<string, number>> = {
	LAB: { L: 100, a: 128, b: 128 },
	HLS: { H: 360, L: 1, S: 1 },
};

export function sliderBounds(space: "LAB" | "HLS", channel: string, which: Which): SliderBounds {
	if (which === "mul") {
		return { min: 0.2, max: 3, step: 0.01 };
	}
	const range = ADD_RANGE[space]?.[channel] ?? 100;
	return { min: -range, max: range, step: range / 200 };
}

/** Regions offered in the UI: every labeled region plus the whole image. */
export function regionChoices(info: SessionInfo): Region[] {
	return ["all", ...info.regions.map((r) => r.label)];
}
