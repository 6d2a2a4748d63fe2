"""Text formatting shared by the CSV/JSON writers."""

import csv
import io


def fmt_float(x) -> str:
    """Shortest round-trip decimal form, '.' as decimal separator."""
    return repr(float(x))


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()
