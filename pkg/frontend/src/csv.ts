/** Minimal CSV parsing for the harness result schema. */

export interface CsvTable {
  header: string[];
  rows: string[][];
}

/** Parse CSV text; handles double-quoted fields with embedded commas. */
export function parseCsv(text: string): CsvTable {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    return { header: [], rows: [] };
  }
  const parseLine = (line: string): string[] => {
    const out: string[] = [];
    let field = "";
    let quoted = false;
    for (let i = 0; i < line.length; i++) {
      const ch = line[i];
      if (quoted) {
        if (ch === '"' && line[i + 1] === '"') {
          field += '"';
          i++;
        } else if (ch === '"') {
          quoted = false;
        } else {
          field += ch;
        }
      } else if (ch === '"') {
        quoted = true;
      } else if (ch === ",") {
        out.push(field);
        field = "";
      } else {
        field += ch;
      }
    }
    out.push(field);
    return out;
  };
  const header = parseLine(lines[0]);
  return { header, rows: lines.slice(1).map(parseLine) };
}
