"""Print the recomputed worked-example constants next to the printed ones."""

from fracblow.audit import audit_published_examples, flagged_examples


def main() -> None:
    rows = audit_published_examples()
    width = max(len(r.key) for r in rows)
    for r in rows:
        mark = "ok  " if r.match else "DIFF"
        print(f"{mark} {r.key:<{width}} {r.quantity:<13} printed {r.published:<40} computed {r.computed} {r.note}")
    print("flagged:", ", ".join(flagged_examples(rows)))


if __name__ == "__main__":
    main()
