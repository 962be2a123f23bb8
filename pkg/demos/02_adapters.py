# In[]:
# ## One frozen model, five ways to fine-tune it
import numpy as np

from smellpeft.peft import PeftConfig, attach, describe, trainable_parameter_count
from smellpeft.train import memory_account
from smellpeft.transformer import ModelConfig, forward, grad_check, init_model

cfg = ModelConfig(vocab_size=512, d_model=32, n_heads=4, n_layers=2, d_ff=64, max_seq_len=138, seed=0)
base = init_model(cfg)
print(describe(base))

# In[]:
# Trainable parameters and estimated peak training memory (float64, batch 8, 128 tokens).
setups = {
    "full": PeftConfig("full"),
    "prompt": PeftConfig("prompt", n_virtual_tokens=10),
    "prefix": PeftConfig("prefix", n_virtual_tokens=10),
    "lora": PeftConfig("lora", lora_rank=8),
    "ia3": PeftConfig("ia3"),
}
models = {}
for name, peft in setups.items():
    model = attach(base.copy(), peft, max_input_len=128)
    models[name] = model
    mem = memory_account(model, 8, 128)
    print(f"{name:7s} trainable {trainable_parameter_count(model):7d}  peak {mem.peak_estimate_bytes / 2**20:6.2f} MiB")

# In[]:
# LoRA starts with B = 0 and (IA)3 with unit scales, so both leave the logits untouched.
ids = np.random.default_rng(0).integers(3, 512, size=(4, 40))
ref = forward(base, ids)
for name in ("lora", "ia3"):
    print(name, "max |diff| at init:", np.abs(forward(models[name], ids) - ref).max())

# In[]:
# ## Gradient check
# Central differences against the handwritten backward pass, a few coordinates per tensor.
small = ModelConfig(vocab_size=64, d_model=16, n_heads=4, n_layers=2, d_ff=32, max_seq_len=12, seed=0)
model = attach(init_model(small), PeftConfig("lora", lora_rank=4))
for p in model.params.values():
    if p.role == "adapter":
        p.value += np.random.default_rng(1).normal(0, 0.1, p.value.shape)
ids = np.random.default_rng(2).integers(3, 64, size=(3, 12))
for entry in grad_check(model, ids, [0, 1, 0], n_coords=8):
    if not entry.skipped:
        print(f"{entry.name:32s} {entry.max_rel_error:.2e}")
