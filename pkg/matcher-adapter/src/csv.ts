import { MatchRow } from "./matching";

export const HEADER = "x_src,y_src,x_dst,y_dst,provenance";

/** Format matches as CSV with a provenance tag on every row. */
export function formatMatchCsv(rows: MatchRow[], provenance: string): string {
  const lines = [HEADER];
  for (const row of rows) {
    lines.push(
      `${row.xSrc},${row.ySrc},${row.xDst},${row.yDst},${provenance}`,
    );
  }
  return lines.join("\n") + "\n";
}
