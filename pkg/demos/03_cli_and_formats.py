"""End-to-end CLI walkthrough: generate, complete, evaluate, benchmark.

Everything here shells out to the `nort` command the package installs,
using the plain-text COO format for sparse observations and the .dt3
binary format for dense tensors.

Run:  python3 demos/03_cli_and_formats.py
"""

import json
import pathlib
import subprocess
import sys
import tempfile

def run(*args):
    print("$ nort", " ".join(args))
    subprocess.run([sys.executable, "-m", "nort.cli", *args], check=True)

tmp = pathlib.Path(tempfile.mkdtemp(prefix="nort-demo-"))
print(f"working in {tmp}\n")

# 1. Synthesize a dataset.  Writes <out>.train.coo, <out>.val.coo and the
#    clean ground truth <out>.truth.dt3.
run("synth", "--i1", "80", "--i2", "80", "--i3", "5", "--rank", "4",
    "--noise-std", "0.01", "--seed", "7", "--out", str(tmp / "data"))

# 2. Complete the tensor from the training entries.  The COO format is
#    one header line "I1 I2 I3 nnz" followed by "i j k value" lines
#    (1-based indices) -- easy to produce from any source.
run("complete", "--train", str(tmp / "data.train.coo"),
    "--val", str(tmp / "data.val.coo"),
    "--reg", "lsp", "--lambda", "2.0", "--theta", "1.0",
    "--D", "2", "--max-iters", "400", "--max-rank", "10", "--seed", "0",
    "--trace", str(tmp / "trace.csv"),
    "--summary", str(tmp / "summary.json"),
    "--save-dense", str(tmp / "solution.dt3"))

# 3. Score the reconstruction against the clean ground truth.
run("eval", "--pred", str(tmp / "solution.dt3"),
    "--ref", str(tmp / "data.truth.dt3"))

# 4. Grid-search lambda on the validation split via a config file.
(tmp / "bench.ini").write_text(
    f"""[data]
source = coo
train = {tmp / 'data.train.coo'}
val = {tmp / 'data.val.coo'}

[solver]
solver = nort
reg = lsp
max_iters = 200
max_rank = 10

[grid]
lambda = 0.5 2.0 8.0
theta = 1.0

[output]
dir = {tmp / 'bench-out'}
""")
run("bench", "--config", str(tmp / "bench.ini"))

report = json.loads((tmp / "bench-out" / "report.json").read_text())
print("\nbest grid cell:", report["best"])
print(f"artifacts kept in {tmp}")
