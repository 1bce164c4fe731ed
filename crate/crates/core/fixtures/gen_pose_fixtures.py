import numpy as np
def R(axis,a):
    axis=np.array(axis,float);K=np.array([[0,-axis[2],axis[1]],[axis[2],0,-axis[0]],[-axis[1],axis[0],0]])
    return np.eye(3)+np.sin(a)*K+(1-np.cos(a))*K@K
def H(Rm=np.eye(3),t=(0,0,0)):
    M=np.eye(4);M[:3,:3]=Rm;M[:3,3]=t;return M
axes=[(0,0,1),(0,1,0),(0,1,0),(1,0,0),(0,1,0),(1,0,0)]
links=[(350,0,815),(0,0,850),(700,0,145),(120,0,0),(10,0,20),(300,0,-60)]
tcp=(95,0,-80)
q=[0.3,-0.4,0.25,0.7,-0.5,1.1]
M=H()
for a,l,qi in zip(axes,links,q):
    M=M@H(R(a,qi))@H(t=l)
M=M@H(t=tcp)
open('crates/core/fixtures/kr30_like_pose.txt','w').write("[%.12f, %.12f, %.12f]\n"%tuple(M[:3,3]))
g=np.array([0,0,9.81])
m=[0,67.0,-13.2,34.6,-26.5,1.0]
k=[0,3.87e-9,4.26e-9,20.3e-9,47.8e-9,70.1e-9]
Rg=np.eye(3); p=np.zeros(3); origins=[]; gaxes=[]; linkg=[]
for a,l,qi in zip(axes,links,q):
    origins.append(p.copy()); gaxes.append(Rg@np.array(a,float))
    Rg=Rg@R(a,qi); lg=Rg@np.array(l,float); linkg.append(lg); p=p+lg
out=[]
for i in range(6):
    tau=0.5*m[i]*np.cross(linkg[i],g)
    for j in range(i+1,6):
        tau+=m[j]*np.cross(origins[j]-origins[i]+0.5*linkg[j],g)
    out.append(k[i]*gaxes[i].dot(tau))
s="[%s]\n"%", ".join("%.17e"%v for v in out)
print(open('crates/core/fixtures/kr30_like_pose.txt').read(), s); open('crates/core/fixtures/compliance_pose.txt','w').write(s)
