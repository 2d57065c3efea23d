"""Extract the interview script table from paper.md into fixtures/table7_script.json."""
import json, re, sys

lines = open(sys.argv[1], encoding="utf-8").read().split("\n")
start = next(i for i, l in enumerate(lines) if l.startswith("Script\tTime Limit (sec)"))
end = next(i for i, l in enumerate(lines) if l.startswith("Table 7."))
entries = []
for line in lines[start + 1:end]:
    if not line.strip():
        continue
    m = re.match(r"^(.*?)\t(\d+)\s*$", line)
    if m:
        text = m.group(1)
        if "<p>" in text:
            paras = re.findall(r"<p>(.*?)</p>", text)
            text = "\n\n".join(p.strip() for p in paras)
        entries.append([text.strip(), int(m.group(2))])
    else:
        entries[-1][0] = entries[-1][0] + " " + line.strip().rstrip("\t").strip()
out = []
for i, (text, limit) in enumerate(entries):
    out.append({"id": f"q{i:03d}", "text": text.replace("\\$", "$"), "time_limit_sec": limit})
json.dump(out, open(sys.argv[2], "w", encoding="utf-8"), indent=2, ensure_ascii=False)
print(len(out), sum(e["time_limit_sec"] for e in out), sum(1 for e in out if e["time_limit_sec"] == 0))
