from setuptools import setup
import os

_here = os.path.abspath(os.path.dirname(__file__))

# Read the version number
version = {}
with open(os.path.join(_here, 'nlhrflow', 'version.py')) as f:
    exec(f.read(), version)

# Store the README.md file
with open(os.path.join(_here, "README.md"), encoding="utf-8") as f:
    longDescription = f.read()


setup(
  name = 'nlhrflow',
  packages = ['nlhrflow'],
  version = version['__version__'],
  license='MIT',
  description = 'Simulated ultrasound vector flow imaging with a nonlinear high-resolution beamformer',
  long_description=longDescription,
  long_description_content_type="text/markdown",
  keywords = ['ultrasound', 'beamforming', 'vector-flow', 'doppler', 'plane-wave',
              'multiply-and-sum', 'clutter-filter'],
  python_requires='>=3.8',
  install_requires=[
          'numpy>=1.19.2',
          'scipy>=1.6',
          'plotly>=4.14.1',
      ],
  entry_points={
      'console_scripts': ['nlhrflow=nlhrflow.cli:main'],
  },
  classifiers=[
    'Development Status :: 3 - Alpha',
    'License :: OSI Approved :: MIT License',
    'Programming Language :: Python :: 3',
    'Programming Language :: Python :: 3.8',
    'Programming Language :: Python :: 3.9',
    'Programming Language :: Python :: 3.10',
    'Topic :: Scientific/Engineering :: Medical Science Apps.',
  ],
)
