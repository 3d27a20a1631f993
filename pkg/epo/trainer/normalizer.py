import numpy as np

VAR_EPS = 1e-8
CLIP = 10.0


class RunningNormalizer:
    """Per-dimension running mean and variance merged with the parallel update rule"""

    def __init__(self, dim: int, epsilon: float = 1e-4, clip: float = CLIP):
        self.dim = dim
        self.clip = clip
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = float(epsilon)

    def update(self, batch):
        x = np.asarray(batch, dtype=np.float64).reshape(-1, self.dim)
        if x.shape[0] == 0:
            return
        self.update_from_moments(x.mean(axis=0), x.var(axis=0), x.shape[0])

    def update_from_moments(self, batch_mean: np.ndarray, batch_var: np.ndarray, batch_count: int):
        delta = batch_mean - self.mean
        total = self.count + batch_count
        new_mean = self.mean + delta * batch_count / total
        m2 = self.var * self.count + batch_var * batch_count + delta * delta * self.count * batch_count / total
        self.mean = new_mean
        self.var = m2 / total
        self.count = total

    def normalize(self, batch) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float64)
        return np.clip((x - self.mean) / np.sqrt(self.var + VAR_EPS), -self.clip, self.clip)

    def state_arrays(self) -> dict:
        return {"mean": self.mean.copy(), "var": self.var.copy(), "count": np.array([self.count])}

    def load_state(self, arrays: dict):
        self.mean = np.asarray(arrays["mean"], dtype=np.float64).reshape(self.dim).copy()
        self.var = np.asarray(arrays["var"], dtype=np.float64).reshape(self.dim).copy()
        self.count = float(np.asarray(arrays["count"]).reshape(-1)[0])
