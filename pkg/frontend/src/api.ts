// Typed client for the harmonization service. The UI never re-implements
// retouch math: previews and heatmaps are always rendered server-side.

export type Which = "mul" | "add";
export type Region = number | "all";

export interface EditDelta {
	channel: string;
	op: Which;
	region: Region;
	value: number;
}

export interface RegionInfo {
	label: number;
	area: number;
}

export interface SessionInfo {
	id: string;
	width: number;
	height: number;
	space: "LAB" | "HLS";
	channels: string[];
	regions: RegionInfo[];
	edits: EditDelta[];
	has_reference: boolean;
}

export interface EditAck {
	edits: number;
	cumulative: { mul: number; add: number };
}

export interface ExportResult {
	omsk: string;
	png: string;
	edits: number;
}

export class ApiError extends Error {
	constructor(public status: number, message: string) {
		super(message);
	}
}

async function asJson<T>(res: Response): Promise<T> {
	if (!res.ok) {
		let detail = res.statusText;
		try {
			const body = await res.json();
			if (typeof body.detail === "string") detail = body.detail;
		} catch {
			// keep statusText
		}
		throw new ApiError(res.status, detail);
	}
	return res.json() as Promise<T>;
}

export class ApiClient {
	constructor(private base: string = "") {}

	sessionUrl(id: string): string {
		return `${this.base}/session/${encodeURIComponent(id)}`;
	}

	compositeUrl(id: string): string {
		return `${this.base}/composite/${encodeURIComponent(id)}`;
	}

	previewUrl(id: string, bust: number): string {
		return `${this.base}/preview/${encodeURIComponent(id)}?v=${bust}`;
	}

	maskUrl(id: string, which: Which, channel: string, bust: number): string {
		return `${this.base}/maskimg/${encodeURIComponent(id)}/${which}/${encodeURIComponent(channel)}?v=${bust}`;
	}

	regionThumbUrl(id: string, label: number): string {
		return `${this.base}/regionthumb/${encodeURIComponent(id)}/${label}`;
	}

	async listSessions(): Promise<string[]> {
		const res = await fetch(`${this.base}/sessions`);
		const body = await asJson<{ sessions: string[] }>(res);
		return body.sessions;
	}

	async session(id: string): Promise<SessionInfo> {
		return asJson<SessionInfo>(await fetch(this.sessionUrl(id)));
	}

	async edit(id: string, delta: EditDelta): Promise<EditAck> {
		const res = await fetch(`${this.base}/edit/${encodeURIComponent(id)}`, {
			method: "POST",
			headers: { "content-type": "application/json" },
			body: JSON.stringify(delta),
		});
		return asJson<EditAck>(res);
	}

	async undo(id: string): Promise<{ edits: number }> {
		const res = await fetch(`${this.base}/undo/${encodeURIComponent(id)}`, {
			method: "POST",
		});
		return asJson<{ edits: number }>(res);
	}

	async exportMasks(id: string): Promise<ExportResult> {
		const res = await fetch(`${this.base}/export/${encodeURIComponent(id)}`, {
			method: "POST",
		});
		return asJson<ExportResult>(res);
	}
}
