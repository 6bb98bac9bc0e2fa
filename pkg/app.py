import streamlit as st
from dotenv import load_dotenv
from pathlib import Path

from services.refsynth_service import RefsynthService, render_ref
from services.solver import Status
from services.synthesis import SynthesisError
from tools.constraints import SpecError
from tools.lm_frontend import LmParseError, UnknownLockTarget
from utils.config import Settings
from utils.specs import SpecLoader
from utils.log import configure_logging
from utils.tracing import init_tracing

# Load env vars and init tracing
load_dotenv()
settings = Settings.from_env()
configure_logging(settings.log_level)
init_tracing()

CORPUS_DIR = Path(__file__).parent / "corpus"

st.set_page_config(
    page_title="refsynth playground",
    page_icon="🔗",
    layout="wide"
)

# Initialize session state variables
if 'program' not in st.session_state:
    st.session_state.program = "mod A {\n  var x = [[y#1]]\n  var y = 1\n}\n"
if 'synth_report' not in st.session_state:
    st.session_state.synth_report = None
if 'check_report' not in st.session_state:
    st.session_state.check_report = None

st.title("🔗 refsynth playground")

# --- SIDEBAR: SETTINGS ---
with st.sidebar:
    st.header("⚙️ Settings")
    loader_names = SpecLoader().bundled()
    spec_name = st.selectbox("Rule file", loader_names, index=loader_names.index(settings.spec) if settings.spec in loader_names else 0)
    max_solutions = st.number_input("Solutions per hole", min_value=1, max_value=20, value=max(2, settings.max_solutions))
    max_depth = st.number_input("Max depth", min_value=0, max_value=16, value=settings.max_depth)
    timeout_ms = st.number_input("Timeout (ms)", min_value=100, max_value=600_000, value=settings.timeout_ms, step=1000)
    heuristics = st.toggle("Heuristics", value=settings.heuristics)

    st.divider()
    examples = sorted(p.name for p in CORPUS_DIR.glob("*.lm"))
    picked = st.selectbox("Load a corpus program", ["—"] + examples)
    if picked != "—" and st.button("Load"):
        st.session_state.program = (CORPUS_DIR / picked).read_text(encoding="utf-8")
        st.session_state.synth_report = None
        st.session_state.check_report = None
        st.rerun()
# ---------------------------------------

service = RefsynthService(
    settings.override(
        spec=spec_name,
        max_solutions=int(max_solutions),
        max_depth=int(max_depth),
        timeout_ms=int(timeout_ms),
        heuristics=heuristics,
    )
)

program = st.text_area(
    "LM program",
    value=st.session_state.program,
    height=240,
    help="Write locked references as [[name#k]]: the k-th declaration named `name`, counted in pre-order."
)
st.session_state.program = program

col1, col2 = st.columns(2)
with col1:
    run_check = st.button("Check", use_container_width=True)
with col2:
    run_synth = st.button("Synthesize", type="primary", use_container_width=True)

if run_check:
    try:
        st.session_state.check_report = service.check(program)
    except (LmParseError, UnknownLockTarget, SpecError) as e:
        st.error(f"Input error: {e}")
        st.stop()

if run_synth:
    with st.spinner("Searching for references..."):
        try:
            st.session_state.synth_report = service.synthesize(program)
        except (LmParseError, UnknownLockTarget, SpecError, SynthesisError) as e:
            st.session_state.synth_report = None
            st.error(f"{type(e).__name__}: {e}")

# Tabs: Results and Graph
tab1, tab2 = st.tabs(["🧩 Results", "🕸️ Scope graph"])

# --- TAB 1: RESULTS ---
with tab1:
    report = st.session_state.check_report
    if report is not None:
        if report.status is Status.SUCCESS:
            st.success(f"Well typed ({report.steps} solver steps).")
        elif report.status is Status.FAILURE:
            st.error(f"Type error: {report.failure}")
        else:
            st.warning(f"Stuck on {len(report.remaining)} constraints.")
            st.code("\n".join(report.remaining))

    synth_report = st.session_state.synth_report
    if synth_report is not None:
        if synth_report.truncated:
            st.caption(f"Search stopped early: {synth_report.truncated}")
        for hole, target in sorted(synth_report.targets.items()):
            with st.container(border=True):
                st.subheader(f"{hole} → {target.name}#{target.ordinal}")
                st.caption(f"at {hole.location}, first solution after {synth_report.hole_ms.get(hole, 0):.1f} ms")
                for record in synth_report.for_hole(hole):
                    st.markdown(f"- `{record.render(render_ref)}`")
        st.markdown("### Unlocked program")
        st.code(synth_report.unlocked())

# --- TAB 2: GRAPH ---
with tab2:
    try:
        st.graphviz_chart(service.graph(program))
    except (LmParseError, UnknownLockTarget, SpecError) as e:
        st.info(f"Fix the program to see its scope graph ({e}).")

# Footer
st.divider()
st.caption("Built with Streamlit | refsynth")
