"""
Toy denoising diffusion model: schedule, fully-connected denoiser, 2-D datasets,
training on the DDPM loss and the DDPM / DDIM samplers.
"""
