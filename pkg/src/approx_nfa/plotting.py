"""Interactive trade-off plots of a reduction sweep.

Reads the sweep CSV written by ``approx-nfa pareto --sweep-csv`` (or the
pipeline's ``sweep.csv``) and draws accuracy, acceptance probability and the
cost/probability front with plotly.
"""

import os
from typing import Dict, List, Optional

try:
    import pandas as pd
    import plotly.graph_objects as go
    PLOTLY_AVAILABLE = True
    Figure = go.Figure
except ImportError:
    PLOTLY_AVAILABLE = False
    pd = None
    go = None

    class Figure:
        pass

from .constants import METHODS, SWEEP_CSV_COLUMNS
from .runner import front_indices

PRECISE_LABEL = 'precise'

COLORS = {
    'prune': '#1f77b4',
    'merge': '#ff7f0e',
    'merge-prune': '#2ca02c',
    'bfs': '#d62728',
    PRECISE_LABEL: '#000000',
}


class SweepPlotter:
    """Generate interactive plots from one or more sweep CSV files."""

    def __init__(self, input_file: str, frame: Optional['pd.DataFrame'] = None):
        if not PLOTLY_AVAILABLE:
            raise ImportError("plotly and pandas are required for plotting. Install with: pip install -e \".[plotting]\"")
        self.input_file = input_file
        self.data = frame if frame is not None else self._load(input_file)

    @classmethod
    def from_multiple_files(cls, input_files: List[str]) -> 'SweepPlotter':
        """Concatenate sweeps (e.g. one per training sample); rows keep their source name."""
        if not PLOTLY_AVAILABLE:
            raise ImportError("plotly and pandas are required for plotting. Install with: pip install -e \".[plotting]\"")
        if not input_files:
            raise ValueError("At least one input file must be provided")
        if len(input_files) == 1:
            return cls(input_files[0])
        frames = []
        for path in input_files:
            frame = cls._load(path)
            frame['source'] = os.path.splitext(os.path.basename(path))[0]
            frames.append(frame)
        merged = pd.concat(frames, ignore_index=True)
        return cls(input_files[0], frame=merged)

    @staticmethod
    def _load(path: str) -> 'pd.DataFrame':
        if not os.path.exists(path):
            raise FileNotFoundError(f"Sweep CSV not found: {path}")
        df = pd.read_csv(path)
        missing = [c for c in SWEEP_CSV_COLUMNS if c not in df.columns]
        if missing:
            raise ValueError(f"{path}: not a sweep CSV, missing column(s) {', '.join(missing)}")
        df['method'] = df['method'].astype(str)
        if 'source' not in df.columns:
            df['source'] = ''
        return df

    def _series(self) -> Dict[str, 'pd.DataFrame']:
        """Reduced rows grouped per (method, source), sorted by state count."""
        groups = {}
        reduced = self.data[self.data['method'] != PRECISE_LABEL]
        for (method, source), df in reduced.groupby(['method', 'source'], sort=False):
            name = f'{method} ({source})' if source else method
            groups[name] = df.sort_values('states')
        return groups

    def _precise(self) -> 'pd.DataFrame':
        return self.data[self.data['method'] == PRECISE_LABEL]

    @staticmethod
    def _color(name: str) -> str:
        return COLORS.get(name.split(' ', 1)[0], '#8c564b')

    def _empty(self, text: str) -> Figure:
        return go.Figure().add_annotation(text=text, xref="paper", yref="paper", x=0.5, y=0.5)

    def plot_accuracy(self) -> Figure:
        """AP against the number of states of each reduced automaton."""
        series = self._series()
        if not series:
            return self._empty("No reduced automata in the sweep")
        fig = go.Figure()
        for name, df in series.items():
            fig.add_trace(go.Scatter(
                x=df['states'], y=df['ap'], mode='lines+markers', name=name,
                line=dict(color=self._color(name)),
                text=df.get('theta'),
                hovertemplate='%{y:.4f} at %{x} states<extra>' + name + '</extra>'))
        fig.update_layout(
            title='Accuracy of reduced automata',
            xaxis_title='States',
            yaxis_title='AP',
            yaxis_range=[0, 1.02],
            hovermode='closest'
        )
        return fig

    def plot_probability(self) -> Figure:
        """Acceptance probability against states; the precise automaton as a reference line."""
        series = self._series()
        if not series:
            return self._empty("No reduced automata in the sweep")
        fig = go.Figure()
        for name, df in series.items():
            fig.add_trace(go.Scatter(
                x=df['states'], y=df['prob'], mode='lines+markers', name=name,
                line=dict(color=self._color(name))))
        precise = self._precise()
        if not precise.empty:
            fig.add_hline(y=float(precise['prob'].min()), line_dash='dash',
                          annotation_text='precise')
        fig.update_layout(
            title='Acceptance probability of reduced automata',
            xaxis_title='States',
            yaxis_title='Prob',
            hovermode='closest'
        )
        return fig

    def plot_tradeoff(self) -> Figure:
        """LUT cost against acceptance probability, with the non-dominated points joined."""
        if self.data.empty:
            return self._empty("Empty sweep")
        fig = go.Figure()
        for method in list(METHODS) + [PRECISE_LABEL]:
            df = self.data[self.data['method'] == method]
            if df.empty:
                continue
            fig.add_trace(go.Scatter(
                x=df['cost'], y=df['prob'], mode='markers', name=method,
                marker=dict(color=COLORS[method], size=9 if method == PRECISE_LABEL else 7)))
        front = self.front()
        fig.add_trace(go.Scatter(x=front['cost'], y=front['prob'], mode='lines',
                                 name='Pareto front', line=dict(color='grey', dash='dot')))
        fig.update_xaxes(title_text='LUTs (estimated)')
        fig.update_yaxes(title_text='Prob')
        fig.update_layout(title_text='Cost / acceptance trade-off')
        return fig

    def front(self) -> 'pd.DataFrame':
        """Rows on the (cost, prob) Pareto front, sorted by cost."""
        data = self.data.reset_index(drop=True)
        points = [(float(cost), float(prob), method == PRECISE_LABEL, str(i))
                  for i, (cost, prob, method) in enumerate(zip(data['cost'], data['prob'], data['method']))]
        return data.loc[front_indices(points)]

    def generate_all_plots(self, output_dir: str = '.') -> List[str]:
        """Write every plot as HTML; returns the files written."""
        os.makedirs(output_dir, exist_ok=True)
        plots = {
            'accuracy': self.plot_accuracy,
            'probability': self.plot_probability,
            'tradeoff': self.plot_tradeoff,
        }
        base_name = os.path.splitext(os.path.basename(self.input_file))[0]
        written = []
        for plot_name, plot_func in plots.items():
            try:
                fig = plot_func()
                output_file = os.path.join(output_dir, f"{base_name}_{plot_name}.html")
                fig.write_html(output_file)
                print(f"Generated: {output_file}")
                written.append(output_file)
            except Exception as e:
                print(f"Error generating {plot_name}: {e}")
        return written
