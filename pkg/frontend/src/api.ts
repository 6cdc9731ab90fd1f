/** Thin typed wrapper over the annotation service's /api surface. */

import { FrameInfo, PoseRow, SkeletonInfo } from "./model.js";

export interface OutliersResponse {
  frame_ids: number[];
  prominence_multiplier: number | null;
  min_separation: number | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    let code = "http_error";
    let message = `${res.status} ${res.statusText}`;
    try {
      const body = await res.json();
      if (body && typeof body.code === "string") {
        code = body.code;
        message = body.message ?? message;
      }
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(res.status, code, message);
  }
  return (await res.json()) as T;
}

export class AnnotatorApi {
  constructor(private base: string = "") {}

  getSkeleton(): Promise<SkeletonInfo> {
    return request<SkeletonInfo>(`${this.base}/api/skeleton`);
  }

  async listFrames(): Promise<FrameInfo[]> {
    const body = await request<{ frames: FrameInfo[] }>(`${this.base}/api/frames`);
    return body.frames;
  }

  imageUrl(frameId: number): string {
    return `${this.base}/api/frames/${frameId}/image`;
  }

  async getKeypoints(frameId: number): Promise<PoseRow[]> {
    const body = await request<{ rows: PoseRow[] }>(
      `${this.base}/api/frames/${frameId}/keypoints`,
    );
    return body.rows;
  }

  async putKeypoints(frameId: number, rows: PoseRow[]): Promise<PoseRow[]> {
    const body = await request<{ rows: PoseRow[] }>(
      `${this.base}/api/frames/${frameId}/keypoints`,
      {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ rows }),
      },
    );
    return body.rows;
  }

  getOutliers(): Promise<OutliersResponse> {
    return request<OutliersResponse>(`${this.base}/api/outliers`);
  }

  async predict(frameId: number): Promise<PoseRow[]> {
    const body = await request<{ rows: PoseRow[] }>(
      `${this.base}/api/predict/${frameId}`,
      { method: "POST" },
    );
    return body.rows;
  }
}
