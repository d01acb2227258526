/** GeoJSON download: fetch the server's bytes and hand them to a sink
 * unmodified, so the saved file is exactly what the service produced.
 */

import type { ApiClient } from "./api.js";

export type SaveSink = (filename: string, bytes: Uint8Array) => void;

export async function downloadJobGeojson(
  client: ApiClient,
  jobId: string,
  slideId: string,
  save: SaveSink,
): Promise<Uint8Array> {
  const bytes = await client.getJobGeojsonBytes(jobId);
  save(`${slideId}_attention.geojson`, bytes);
  return bytes;
}

/** Browser sink: trigger a file download via a temporary object URL. */
export function browserSaveSink(doc: Document): SaveSink {
  return (filename, bytes) => {
    const buffer = bytes.buffer.slice(
      bytes.byteOffset,
      bytes.byteOffset + bytes.byteLength,
    ) as ArrayBuffer;
    const blob = new Blob([buffer], { type: "application/geo+json" });
    const url = URL.createObjectURL(blob);
    const anchor = doc.createElement("a");
    anchor.href = url;
    anchor.download = filename;
    anchor.click();
    URL.revokeObjectURL(url);
  };
}
